"""Deviation, coarse-graining-error and convexity measures.

Pure post-processing over sampled scalar series: the deviation of exact
quadrature moments from their semiclassical values, its angle average, the
cumulative relative error induced by radial coarse graining, and the mixing
weight extracted from the convex-combination ansatz for the open state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MACHINE_FLOOR = 1e-24
THETA_GRID_SIZE = 20


@dataclass
class TimeSeries:
    """Scalar samples on a shared, strictly increasing time grid."""

    times: np.ndarray
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape:
            raise ValueError("times and values must have equal length")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"non-finite values in series {self.label!r}")


def _check_same_grid(a: TimeSeries, b: TimeSeries) -> None:
    if len(a.times) != len(b.times) or not np.allclose(a.times, b.times, rtol=0, atol=1e-12):
        raise ValueError("series are not on the same time grid")


def deviation(exact: TimeSeries, twa: TimeSeries) -> TimeSeries:
    """Pointwise difference exact - semiclassical on a shared grid."""
    _check_same_grid(exact, twa)
    return TimeSeries(times=exact.times, values=exact.values - twa.values,
                      label=f"dev({exact.label})")


def theta_grid(n_theta: int = THETA_GRID_SIZE, offset: float = 0.0) -> np.ndarray:
    """Uniform homodyne angles on [0, 2*pi)."""
    return (offset + 2.0 * math.pi * np.arange(n_theta) / n_theta) % (2.0 * math.pi)


def averaged_deviation(exact_by_theta: np.ndarray, twa_by_theta: np.ndarray,
                       times: np.ndarray, n: int, alpha0: float,
                       label: str = "") -> TimeSeries:
    """Angle-averaged absolute deviation, normalized by ``alpha0**n``.

    ``exact_by_theta`` and ``twa_by_theta`` have shape (n_theta, n_times);
    the absolute value sits inside the angle mean so deviations of opposite
    sign cannot cancel.
    """
    exact_by_theta = np.asarray(exact_by_theta, dtype=float)
    twa_by_theta = np.asarray(twa_by_theta, dtype=float)
    if exact_by_theta.shape != twa_by_theta.shape:
        raise ValueError("theta tables must have identical shapes")
    vals = np.mean(np.abs(exact_by_theta - twa_by_theta), axis=0) / alpha0**n
    return TimeSeries(times=np.asarray(times, float), values=vals, label=label)


def grid_error(coarse: TimeSeries, reference: TimeSeries,
               window: tuple[float, float] | None = None) -> float:
    """Cumulative relative coarse-graining error

    ``int |coarse - reference| dt / int |reference| dt`` over the window
    (trapezoid on the shared grid), floored at 1e-24 for log plots.

    Raises ``ZeroDivisionError`` when the reference deviation vanishes over
    the window (the metric is undefined there).
    """
    _check_same_grid(coarse, reference)
    t = coarse.times
    mask = np.ones(len(t), dtype=bool)
    if window is not None:
        mask = (t >= window[0] - 1e-12) & (t <= window[1] + 1e-12)
        if mask.sum() < 2:
            raise ValueError("window contains fewer than 2 samples")
    num = np.trapezoid(np.abs(coarse.values[mask] - reference.values[mask]), t[mask])
    den = np.trapezoid(np.abs(reference.values[mask]), t[mask])
    if den == 0.0:
        raise ZeroDivisionError("reference deviation vanishes over the window")
    return max(float(num / den), MACHINE_FLOOR)


@dataclass
class GridErrorReport:
    """Coarse-graining errors over a ladder of radial resolutions."""

    alpha0: float
    gamma: float
    n: int
    reference_dr: float
    window: tuple[float, float]
    delta_r: list[float] = field(default_factory=list)
    epsilon: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "alpha0": self.alpha0,
            "gamma": self.gamma,
            "n": self.n,
            "reference_dr": self.reference_dr,
            "window": list(self.window),
            "delta_r": list(self.delta_r),
            "epsilon": list(self.epsilon),
        }


def convexity_p(open_value: float, closed_value: float, classical_value: float,
                n: int, alpha0: float) -> float | None:
    """Mixing weight ``p = (open - classical) / (closed - classical)``.

    Returns ``None`` when the denominator is below ``1e-6 * alpha0**n`` (the
    observable cannot distinguish the closed state from the background at
    that order).
    """
    den = closed_value - classical_value
    if abs(den) <= 1e-6 * alpha0**n:
        return None
    return (open_value - classical_value) / den


@dataclass
class ConvexityReport:
    """Extracted mixing weights per observable order at one evaluation time."""

    alpha0: float
    gamma: float
    t_eval: float
    orders: list[int] = field(default_factory=list)
    p_values: list[float | None] = field(default_factory=list)
    denominators: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "alpha0": self.alpha0,
            "gamma": self.gamma,
            "t_eval": self.t_eval,
            "orders": list(self.orders),
            "p_values": [None if p is None else float(p) for p in self.p_values],
            "denominators": list(self.denominators),
        }
