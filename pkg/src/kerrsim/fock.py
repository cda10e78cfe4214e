"""Exact open-system evolution in a truncated number basis.

The master equation of the lossy Kerr oscillator couples density-matrix
elements only along diagonal stripes of constant ``n - m``. Each stripe obeys
a lower-bidiagonal linear system

    d rho_i / dt = -gtilde_i rho_i + g_i rho_{i-1},

(``i`` counted from the truncation corner) whose solution is a finite sum of
decaying exponentials. The coefficients follow from a one-pass recursion and
a triangular solve against the initial stripe; the factor matrix is cached so
the state can be evaluated at any later time at quadratic cost.

For ``gamma = 0`` the exponential sum degenerates (all stripe frequencies for
the diagonal coincide) and the evolution is instead the exact single-term
phase map. An adaptive direct integrator of the same stripe system provides
an independent cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import solve_triangular
from scipy.special import gammaln

from .analytic import OrderedMonomial, QuadratureSpec, ordered_to_normal, quadrature_decomposition
from .params import ModelParams

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-10
TRUNCATION_TOL = 1e-10


@dataclass
class FockDensity:
    """Density matrix on the number basis truncated at ``n_trunc``.

    ``rho`` has shape ``(n_trunc + 1, n_trunc + 1)``; ``t`` is the time the
    state refers to.
    """

    n_trunc: int
    rho: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=complex)
        if self.rho.shape != (self.n_trunc + 1, self.n_trunc + 1):
            raise ValueError(
                f"rho shape {self.rho.shape} does not match n_trunc={self.n_trunc}"
            )

    def validate(self, check_truncation: bool = True) -> None:
        """Raise if hermiticity, trace, diagonal reality or the truncation
        tail are out of tolerance."""
        herm = np.max(np.abs(self.rho - self.rho.conj().T))
        if herm > HERMITICITY_TOL:
            raise ValueError(f"hermiticity violated: {herm:.3e}")
        tr = np.trace(self.rho)
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"trace deviates from 1 by {abs(tr - 1.0):.3e}")
        diag = np.diag(self.rho)
        if np.max(np.abs(diag.imag)) > HERMITICITY_TOL or np.min(diag.real) < -HERMITICITY_TOL:
            raise ValueError("diagonal not real nonnegative within tolerance")
        if check_truncation:
            tail = float(np.sum(diag.real[max(0, self.n_trunc - 5):]))
            if tail > TRUNCATION_TOL:
                raise ValueError(
                    f"population {tail:.3e} within 5 levels of the truncation edge; "
                    "increase n_trunc"
                )

    def mean_photon_number(self) -> float:
        return float(np.real(np.diag(self.rho) @ np.arange(self.n_trunc + 1)))


def default_n_trunc(alpha0: float) -> int:
    """Truncation heuristic ``ceil(alpha0^2 + 8 alpha0 + 10)``; callers should
    still run the post-hoc tail check in :meth:`FockDensity.validate`."""
    return int(math.ceil(alpha0 * alpha0 + 8.0 * alpha0 + 10.0))


def coherent_vector(alpha0: float, n_trunc: int) -> np.ndarray:
    """State vector of ``|alpha0>`` (real amplitude), amplitudes computed in
    log space to stay finite for large cutoffs."""
    n = np.arange(n_trunc + 1)
    if alpha0 == 0.0:
        v = np.zeros(n_trunc + 1)
        v[0] = 1.0
        return v.astype(complex)
    log_c = -0.5 * alpha0 * alpha0 + n * math.log(alpha0) - 0.5 * gammaln(n + 1)
    return np.exp(log_c).astype(complex)


def kerr_evolved_vector(alpha0: float, n_trunc: int, kt: float) -> np.ndarray:
    """Closed-system state vector at Kerr phase ``kt = kappa*t``."""
    n = np.arange(n_trunc + 1)
    return coherent_vector(alpha0, n_trunc) * np.exp(-0.5j * kt * n * (n - 1))


def density_from_vector(v: np.ndarray, t: float = 0.0) -> FockDensity:
    return FockDensity(n_trunc=len(v) - 1, rho=np.outer(v, v.conj()), t=t)


def coherent_density(alpha0: float, n_trunc: int | None = None) -> FockDensity:
    if n_trunc is None:
        n_trunc = default_n_trunc(alpha0)
    return density_from_vector(coherent_vector(alpha0, n_trunc))


@dataclass(frozen=True)
class StripeRate:
    """Complex decay rate of the density-matrix element (j, k)."""

    j: int
    k: int
    value: complex


def stripe_rate(j: int, k: int, params: ModelParams) -> StripeRate:
    """Rate ``gtilde_jk = (gamma/2)(j+k) + i(kappa/2)[(j^2-j) - (k^2-k)]``."""
    if j < 0 or k < 0:
        raise ValueError("indices must be nonnegative")
    value = 0.5 * params.gamma * (j + k) + 0.5j * params.kappa * (
        (j * j - j) - (k * k - k)
    )
    return StripeRate(j=j, k=k, value=value)


def _stripe_rates(m: int, n_trunc: int, params: ModelParams) -> np.ndarray:
    """Rates along stripe ``m`` ordered from the truncation corner inward:
    element i sits at (j, k) = (N-i, N-m-i)."""
    i = np.arange(n_trunc - m + 1)
    j = n_trunc - i
    k = n_trunc - m - i
    return 0.5 * params.gamma * (j + k) + 0.5j * params.kappa * (
        (j * j - j) - (k * k - k)
    )


@dataclass
class StripeSolution:
    """Exponential-sum solution of one stripe.

    ``A[i, i']`` multiplies ``exp(-rates[i'] * t)`` in element ``i``; the
    matrix is lower triangular because population only flows toward lower
    occupation. ``recon_error`` is the t = 0 reconstruction residual against
    the initial stripe (a cancellation diagnostic: the recursion trades
    stability in time for large intermediate coefficients).
    """

    m: int
    A: np.ndarray
    rates: np.ndarray
    rho0: np.ndarray
    recon_error: float

    def eval(self, t: float) -> np.ndarray:
        """Stripe element values at time t, ordered from the corner inward."""
        return self.A @ np.exp(-self.rates * t)


def build_stripe_solution(m: int, rho0: FockDensity, params: ModelParams) -> StripeSolution:
    """Exponential-sum coefficients for stripe ``m`` of the initial state.

    Requires ``gamma > 0`` (distinct frequencies within each stripe); the
    closed system is handled by the single-term phase map instead.
    """
    if params.gamma <= 0.0:
        raise ValueError("stripe recursion requires gamma > 0; use the closed-form path")
    N = rho0.n_trunc
    if not 0 <= m <= N:
        raise ValueError(f"stripe offset {m} outside 0..{N}")
    rates = _stripe_rates(m, N, params)
    L = len(rates)
    if L > 1:
        gaps = np.abs(rates[1:] - rates[:-1])
        if np.min(gaps) < 1e-12 * params.kappa:
            raise ValueError(
                f"near-degenerate stripe frequencies in stripe {m}: "
                f"min gap {np.min(gaps):.3e}"
            )
    i = np.arange(L)
    # coupling feeding element i from element i-1 (one step up the cascade)
    g = params.gamma * np.sqrt((N - i + 1.0) * (N - m - i + 1.0))
    F = np.zeros((L, L), dtype=complex)
    F[0, 0] = 1.0
    for ii in range(1, L):
        F[ii, ii] = 1.0
        F[ii, :ii] = F[ii - 1, :ii] * (g[ii] / (rates[ii] - rates[:ii]))
    stripe0 = np.array([rho0.rho[N - k, N - m - k] for k in range(L)], dtype=complex)
    D = solve_triangular(F, stripe0, lower=True)
    A = F * D[None, :]
    recon = float(np.max(np.abs(A.sum(axis=1) - stripe0)))
    return StripeSolution(m=m, A=A, rates=rates, rho0=stripe0, recon_error=recon)


class AnalyticPropagator:
    """Evaluate the open-system state at arbitrary times from cached stripe
    coefficients (or the exact phase map when ``gamma = 0``).

    The exponential-sum coefficients suffer float cancellation that grows
    roughly like ``3**(alpha0^2)``; the t = 0 reconstruction residual
    measures the damage and the propagator refuses to pretend otherwise when
    it exceeds ``recon_tol`` (fall back to :func:`evolve_direct` then).
    """

    def __init__(self, rho0: FockDensity, params: ModelParams,
                 recon_tol: float = 1e-8):
        self.params = params
        self.n_trunc = rho0.n_trunc
        self.t0 = rho0.t
        self._rho0 = rho0.rho.copy()
        if params.gamma > 0.0:
            self.stripes = [
                build_stripe_solution(m, rho0, params) for m in range(self.n_trunc + 1)
            ]
            self.recon_error = max(s.recon_error for s in self.stripes)
            if self.recon_error > recon_tol:
                raise ArithmeticError(
                    f"stripe-coefficient cancellation lost too much precision "
                    f"(t=0 residual {self.recon_error:.2e} > {recon_tol:.0e}); "
                    "use evolve_direct for this state size"
                )
        else:
            j = np.arange(self.n_trunc + 1)
            jj, kk = np.meshgrid(j, j, indexing="ij")
            self._gtilde = 0.5j * params.kappa * ((jj * jj - jj) - (kk * kk - kk))
            self.stripes = None
            self.recon_error = 0.0

    def rho(self, t: float) -> FockDensity:
        """State at time ``t`` (measured from the initial state's time)."""
        dt = t - self.t0
        N = self.n_trunc
        if self.stripes is None:
            out = self._rho0 * np.exp(-self._gtilde * dt)
            return FockDensity(n_trunc=N, rho=out, t=t)
        out = np.zeros((N + 1, N + 1), dtype=complex)
        for s in self.stripes:
            vals = s.eval(dt)
            i = np.arange(len(vals))
            rows, cols = N - i, N - s.m - i
            out[rows, cols] = vals
            if s.m > 0:
                out[cols, rows] = vals.conj()
        return FockDensity(n_trunc=N, rho=out, t=t)


def evolve_analytic(rho0: FockDensity, t: float, params: ModelParams) -> FockDensity:
    """State at time ``t`` via the stripe exponential sums (or the phase map
    for the closed system)."""
    return AnalyticPropagator(rho0, params).rho(t)


def evolve_direct(
    rho0: FockDensity,
    t: float | np.ndarray,
    params: ModelParams,
    tol: float = 1e-12,
) -> FockDensity | list[FockDensity]:
    """Adaptive direct integration of the stripe master equation.

    Independent of the exponential-sum route; used for cross-validation and
    for regimes where the stripe recursion loses precision to cancellation.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    N = rho0.n_trunc
    j = np.arange(N + 1)
    jj, kk = np.meshgrid(j, j, indexing="ij")
    gtilde = 0.5 * params.gamma * (jj + kk) + 0.5j * params.kappa * (
        (jj * jj - jj) - (kk * kk - kk)
    )
    feed = params.gamma * np.sqrt((jj + 1.0) * (kk + 1.0))

    def rhs(_t, y):
        rho = y.reshape(N + 1, N + 1)
        drho = -gtilde * rho
        drho[:-1, :-1] += feed[:-1, :-1] * rho[1:, 1:]
        return drho.ravel()

    ts = np.atleast_1d(np.asarray(t, dtype=float))
    t_end = float(ts[-1])
    sol = solve_ivp(
        rhs,
        (rho0.t, t_end),
        rho0.rho.ravel().copy(),
        method="DOP853",
        t_eval=ts,
        rtol=tol,
        atol=tol,
    )
    if not sol.success:
        raise RuntimeError(f"direct integration failed: {sol.message}")
    states = [
        FockDensity(n_trunc=N, rho=sol.y[:, idx].reshape(N + 1, N + 1), t=float(tv))
        for idx, tv in enumerate(ts)
    ]
    return states if np.ndim(t) else states[0]


def expectation(rho: FockDensity, mono: OrderedMonomial) -> complex:
    """``<adag^mu a^nu>`` in the given ordering.

    Non-normal orderings are first expanded over normally ordered monomials;
    each normal term is a single-stripe sum with factorial weights evaluated
    in log space.
    """
    if mono.mu > rho.n_trunc or mono.nu > rho.n_trunc:
        raise ValueError("operator power exceeds the truncation")
    if mono.ordering != "normal":
        total = 0.0 + 0.0j
        for c, mu, nu in ordered_to_normal(mono).terms:
            total += float(c) * expectation(rho, OrderedMonomial(mu, nu, "normal"))
        return total
    mu, nu, N = mono.mu, mono.nu, rho.n_trunc
    j = np.arange(nu, N + 1 - max(0, mu - nu))
    k = j - nu + mu
    w = np.exp(0.5 * (gammaln(j + 1) + gammaln(k + 1)) - gammaln(j - nu + 1))
    return complex(w @ rho.rho[j, k])


def quadrature_moment_fock(rho: FockDensity, spec: QuadratureSpec) -> float:
    """``<X_theta^n>`` of a Fock-basis state via the symmetric-ordering
    decomposition."""
    if spec.n > 12:
        raise ValueError("quadrature moments supported up to order 12")
    total = 0.0 + 0.0j
    for coeff, mono in quadrature_decomposition(spec):
        total += coeff * expectation(rho, mono)
    if abs(total.imag) > 1e-9 * max(1.0, abs(total.real)):
        raise ArithmeticError(f"imaginary residue too large: {total}")
    return total.real
