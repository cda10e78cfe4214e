"""Simulator for a single bosonic mode under a Kerr nonlinearity with photon
loss: Fourier-radial Wigner-function PDE, truncated Fock-space stripe
evolution, closed-form oracles, and coarse-graining/convexity metrics."""

__version__ = "0.1.0"

from .params import ModelParams

__all__ = ["ModelParams", "__version__"]
