"""Physical parameters of the lossy Kerr oscillator."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class ModelParams:
    """Rates and initial amplitude of the single-mode Kerr oscillator.

    Attributes
    ----------
    kappa : float
        Kerr rate (1/time), > 0.
    gamma : float
        Photon-loss rate (1/time), >= 0.
    alpha0 : float
        Initial coherent amplitude, real and >= 0.
    """

    kappa: float
    gamma: float
    alpha0: float

    def __post_init__(self):
        # kappa = 0 is admitted for loss-only studies (number-basis evolution
        # is well defined there); anything tau-scaled requires kappa > 0.
        if self.kappa < 0:
            raise ValueError(f"kappa must be >= 0, got {self.kappa}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.kappa == 0 and self.gamma == 0:
            raise ValueError("kappa and gamma cannot both vanish")
        if self.alpha0 < 0:
            raise ValueError(f"alpha0 must be real >= 0, got {self.alpha0}")

    @property
    def xi(self) -> float:
        """Dimensionless decay gamma/kappa."""
        if self.kappa == 0:
            raise ValueError("xi is undefined for kappa = 0")
        return self.gamma / self.kappa

    @property
    def nbar(self) -> float:
        """Initial mean photon number alpha0**2."""
        return self.alpha0 * self.alpha0
