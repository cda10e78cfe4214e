"""Fourier-radial representation of the Wigner function.

The Wigner function is stored as angular-harmonic coefficients on a uniform
radial grid,

    W(tau, r, phi) = a_0(tau, r) + sum_k [a_k cos(k phi) + b_k sin(k phi)],

normalized over the complex-amplitude measure: ``2 pi * int r a_0 dr = 1``
and a coherent state peaks at ``2/pi``. Quadratures are ``X = sqrt(2) r cos
phi`` and ``P = sqrt(2) r sin phi``, so moments carry a ``2**((m+n)/2)``
scale on top of the radial/angular integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import ive

from .params import ModelParams

DEFAULT_K_MAX = 60
MAX_MOMENT_ORDER = 12


def default_dr(alpha0: float) -> float:
    """Reference radial resolution ``1e-2 * pi / alpha0**2``."""
    return 1e-2 * math.pi / (alpha0 * alpha0)


@dataclass
class FourierRadialField:
    """Harmonic coefficients of the Wigner function at one instant.

    ``a`` has shape (k_max+1, n_r) over the grid ``r_j = j*dr``, j = 1..n_r;
    ``b`` has the same shape with row 0 identically zero. ``tau`` is the
    dimensionless time ``kappa*t``.
    """

    params: ModelParams
    dr: float
    tau: float
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if self.a.shape != self.b.shape:
            raise ValueError("a and b must have identical shapes")

    @property
    def k_max(self) -> int:
        return self.a.shape[0] - 1

    @property
    def n_r(self) -> int:
        return self.a.shape[1]

    @property
    def r(self) -> np.ndarray:
        return self.dr * np.arange(1, self.n_r + 1)

    @property
    def r_max(self) -> float:
        return self.dr * self.n_r

    def origin_value(self) -> float:
        """Exact Wigner value at r = 0 (parity of a loss-damped Poisson
        distribution, unchanged by the Kerr term)."""
        return origin_boundary_value(self.tau, self.params)

    def norm(self) -> float:
        """``2 pi * int r a_0 dr`` on the grid; 1 for a physical state."""
        return float(2.0 * math.pi * self.dr * np.sum(self.r * self.a[0]))

    def edge_amplitude(self) -> float:
        """Largest |coefficient| on the outermost grid point relative to the
        global peak; a guard against the state leaking past r_max."""
        peak = max(np.max(np.abs(self.a)), np.max(np.abs(self.b)))
        edge = max(np.max(np.abs(self.a[:, -1])), np.max(np.abs(self.b[:, -1])))
        return float(edge / peak) if peak > 0 else 0.0


def origin_boundary_value(tau: float, params: ModelParams) -> float:
    """``W(tau, r=0) = (2/pi) exp(-2 alpha0^2 e^(-tau*xi))``."""
    return 2.0 / math.pi * math.exp(-2.0 * params.alpha0**2 * math.exp(-tau * params.xi))


def init_coherent(
    params: ModelParams,
    k_max: int = DEFAULT_K_MAX,
    n_r: int | None = None,
    dr: float | None = None,
) -> FourierRadialField:
    """Harmonic coefficients of the initial coherent state ``|alpha0>``.

    ``a_0 = (2/pi) e^{-2(alpha0^2+r^2)} I_0(4 r alpha0)`` and
    ``a_k = (4/pi) e^{-2(alpha0^2+r^2)} I_k(4 r alpha0)``, evaluated through
    exponentially scaled Bessel functions so no intermediate overflows for
    any amplitude. The grid must extend to at least ``2*alpha0``.
    """
    if dr is None:
        dr = default_dr(params.alpha0)
    if n_r is None:
        n_r = int(math.ceil(2.0 * params.alpha0 / dr - 1e-9))
    r_max = n_r * dr
    if params.alpha0 > 0 and r_max < 2.0 * params.alpha0 * (1.0 - 1e-12):
        raise ValueError(f"r_max={r_max:.4g} < 2*alpha0={2 * params.alpha0:.4g}")
    r = dr * np.arange(1, n_r + 1)
    k = np.arange(k_max + 1)[:, None]
    # ive(k, x) = I_k(x) e^{-x}; the residual exponent is -2(r - alpha0)^2
    envelope = np.exp(-2.0 * (r - params.alpha0) ** 2)
    a = (4.0 / math.pi) * ive(k, 4.0 * r * params.alpha0) * envelope
    a[0] *= 0.5
    b = np.zeros_like(a)
    return FourierRadialField(params=params, dr=dr, tau=0.0, a=a, b=b)


def angular_weight(m: int, n: int, k: int, parity: str = "cos") -> float:
    """``int_0^{2pi} cos^m(phi) sin^n(phi) {cos|sin}(k phi) dphi`` in closed
    form (double binomial sum with Kronecker-delta selection).

    Zero whenever ``m+n+k`` is odd, for cos-type with odd ``n``, and for
    sin-type with even ``n``.
    """
    if m < 0 or n < 0 or k < 0:
        raise ValueError("m, n, k must be nonnegative")
    if parity not in ("cos", "sin"):
        raise ValueError("parity must be 'cos' or 'sin'")
    if (m + n + k) % 2 == 1:
        return 0.0
    if parity == "cos" and n % 2 == 1:
        return 0.0
    if parity == "sin" and n % 2 == 0:
        return 0.0

    def delta_sum(target: int) -> int:
        # sum over km, kn with 2(km+kn) = target of C(m,km) C(n,kn) (-1)^kn
        total = 0
        if target % 2 != 0:
            return 0
        s = target // 2
        for km in range(0, min(m, s) + 1):
            kn = s - km
            if 0 <= kn <= n:
                total += math.comb(m, km) * math.comb(n, kn) * (-1) ** kn
        return total

    plus = delta_sum(m + n + k)
    minus = delta_sum(m + n - k)
    if parity == "cos":
        sign = (-1) ** (n // 2)
        return math.pi / 2 ** (m + n) * sign * (plus + minus)
    sign = (-1) ** ((n + 1) // 2)
    return math.pi / 2 ** (m + n) * sign * (plus - minus)


def radial_power_integrals(
    coeffs: np.ndarray, dr: float, powers: tuple[int, ...]
) -> np.ndarray:
    """``int r^(p+1) c(r) dr`` on the uniform grid for each power p and each
    coefficient row; returns shape (len(powers),) + coeffs.shape[:-1].

    Plain Riemann sum, equal to the trapezoid rule here because the integrand
    vanishes at both ends of the grid.
    """
    n_r = coeffs.shape[-1]
    r = dr * np.arange(1, n_r + 1)
    out = np.empty((len(powers),) + coeffs.shape[:-1])
    for ip, p in enumerate(powers):
        out[ip] = dr * (coeffs @ r ** (p + 1))
    return out


def moment_xy(field: FourierRadialField, m: int, n: int) -> float:
    """Symmetric-ordered moment ``<{X^m P^n}_sym>`` of the represented state."""
    p = m + n
    if p > MAX_MOMENT_ORDER:
        raise ValueError(f"moment order {p} exceeds {MAX_MOMENT_ORDER}")
    if field.k_max < p:
        raise ValueError(f"moment of order {p} needs harmonics up to k={p}, "
                         f"field has k_max={field.k_max}")
    ra = radial_power_integrals(field.a[: p + 1], field.dr, (p,))[0]
    rb = radial_power_integrals(field.b[: p + 1], field.dr, (p,))[0]
    total = 0.0
    for k in range(p + 1):
        total += angular_weight(m, n, k, "cos") * ra[k]
        total += angular_weight(m, n, k, "sin") * rb[k]
    return 2.0 ** (0.5 * p) * total


def quadrature_moment_field(field: FourierRadialField, spec) -> float:
    """``<X_theta^n>`` from the field via the binomial quadrature mix."""
    n, theta = spec.n, spec.theta
    total = 0.0
    for j in range(n + 1):
        c = math.comb(n, j) * math.cos(theta) ** (n - j) * math.sin(theta) ** j
        if c != 0.0:
            total += c * moment_xy(field, n - j, j)
    return total


class MomentTrace:
    """Radial power integrals of every harmonic sampled along a trajectory.

    Stores ``Ra[p, t, k] = int r^(powers[p]+1) a_k dr`` (same for b), which is
    all that moments need; reading a moment is then just an angular-weight
    contraction. Built incrementally by the PDE driver so full field
    histories never need to be resident.
    """

    def __init__(self, times: np.ndarray, powers: tuple[int, ...], k_max: int,
                 params: ModelParams):
        self.times = np.asarray(times, dtype=float)
        self.powers = tuple(powers)
        self.k_max = k_max
        self.params = params
        nt = len(self.times)
        self.Ra = np.zeros((len(powers), nt, k_max + 1))
        self.Rb = np.zeros((len(powers), nt, k_max + 1))

    @classmethod
    def from_fields(cls, fields: list[FourierRadialField],
                    powers: tuple[int, ...]) -> "MomentTrace":
        f0 = fields[0]
        trace = cls(np.array([f.tau for f in fields]), powers, f0.k_max, f0.params)
        for it, f in enumerate(fields):
            trace.Ra[:, it, :] = radial_power_integrals(f.a, f.dr, powers)
            trace.Rb[:, it, :] = radial_power_integrals(f.b, f.dr, powers)
        return trace

    def fill_harmonic(self, k: int, a_hist: np.ndarray, b_hist: np.ndarray | None,
                      dr: float) -> None:
        """Deposit one harmonic's sampled history (shape (nt, n_r))."""
        self.Ra[:, :, k] = radial_power_integrals(a_hist, dr, self.powers)
        if b_hist is not None:
            self.Rb[:, :, k] = radial_power_integrals(b_hist, dr, self.powers)

    def moment_xy(self, m: int, n: int) -> np.ndarray:
        """Series ``<{X^m P^n}_sym>(t)`` over the sample times."""
        p = m + n
        if p not in self.powers:
            raise ValueError(f"power {p} not collected (have {self.powers})")
        if self.k_max < p:
            raise ValueError(f"need harmonics up to k={p}, have k_max={self.k_max}")
        ip = self.powers.index(p)
        out = np.zeros(len(self.times))
        for k in range(p + 1):
            out += angular_weight(m, n, k, "cos") * self.Ra[ip, :, k]
            out += angular_weight(m, n, k, "sin") * self.Rb[ip, :, k]
        return 2.0 ** (0.5 * p) * out

    def quadrature_moment(self, n: int, theta: float) -> np.ndarray:
        """Series ``<X_theta^n>(t)`` over the sample times."""
        total = np.zeros(len(self.times))
        for j in range(n + 1):
            c = math.comb(n, j) * math.cos(theta) ** (n - j) * math.sin(theta) ** j
            if c != 0.0:
                total += c * self.moment_xy(n - j, j)
        return total


def reconstruct(field: FourierRadialField, r: float, phi: float) -> float:
    """Point value ``W(r, phi)`` with cubic radial interpolation."""
    if not 0.0 <= r <= field.r_max * (1 + 1e-12):
        raise ValueError(f"r={r} outside [0, {field.r_max}]")
    grid = np.concatenate(([0.0], field.r))
    a_ext = np.concatenate((np.zeros((field.k_max + 1, 1)), field.a), axis=1)
    a_ext[0, 0] = field.origin_value()
    b_ext = np.concatenate((np.zeros((field.k_max + 1, 1)), field.b), axis=1)
    a_here = CubicSpline(grid, a_ext, axis=1)(r)
    b_here = CubicSpline(grid, b_ext, axis=1)(r)
    k = np.arange(field.k_max + 1)
    return float(a_here @ np.cos(k * phi) + b_here @ np.sin(k * phi))


def raster(
    field: FourierRadialField,
    phi_step: float = math.pi / 200,
    r_stride: int = 1,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Evaluate W on the polar raster (native radii subsampled by
    ``r_stride``; angles in steps of ``phi_step``).

    Returns (r_values, phi_values, W) with W indexed [i_r, i_phi].
    """
    r_vals = np.concatenate(([0.0], field.r[::r_stride]))
    n_phi = int(round(2.0 * math.pi / phi_step))
    phi_vals = phi_step * np.arange(n_phi)
    a_ext = np.concatenate((np.zeros((field.k_max + 1, 1)), field.a[:, ::r_stride]), axis=1)
    a_ext[0, 0] = field.origin_value()
    b_ext = np.concatenate((np.zeros((field.k_max + 1, 1)), field.b[:, ::r_stride]), axis=1)
    k = np.arange(field.k_max + 1)[:, None]
    cosk = np.cos(k * phi_vals[None, :])
    sink = np.sin(k * phi_vals[None, :])
    W = a_ext.T @ cosk + b_ext.T @ sink
    return r_vals, phi_vals, W


def dump_field(field: FourierRadialField, path) -> None:
    """Write the field as CSV: a metadata header, then one row per radial
    point with all harmonic coefficients."""
    p = field.params
    k_max, n_r = field.k_max, field.n_r
    cols = ["j", "r"] + [f"a{k}" for k in range(k_max + 1)] + [f"b{k}" for k in range(1, k_max + 1)]
    with open(path, "w") as fh:
        for key, val in (
            ("alpha0", p.alpha0), ("kappa", p.kappa), ("gamma", p.gamma),
            ("tau", field.tau), ("k_max", k_max), ("n_r", n_r), ("dr", field.dr),
        ):
            fh.write(f"# {key} = {val!r}\n")
        fh.write(",".join(cols) + "\n")
        r = field.r
        for j in range(n_r):
            row = [str(j + 1), f"{r[j]:.17g}"]
            row += [f"{field.a[k, j]:.17g}" for k in range(k_max + 1)]
            row += [f"{field.b[k, j]:.17g}" for k in range(1, k_max + 1)]
            fh.write(",".join(row) + "\n")


def load_field(path) -> FourierRadialField:
    """Read a field written by :func:`dump_field`."""
    meta = {}
    with open(path) as fh:
        lines = fh.readlines()
    body_start = 0
    for i, line in enumerate(lines):
        if line.startswith("#"):
            key, _, val = line[1:].partition("=")
            meta[key.strip()] = float(val.strip())
        else:
            body_start = i
            break
    k_max, n_r = int(meta["k_max"]), int(meta["n_r"])
    data = np.loadtxt(lines[body_start + 1:], delimiter=",")
    data = np.atleast_2d(data)
    a = data[:, 2:3 + k_max].T.copy()
    b = np.zeros_like(a)
    if k_max >= 1:
        b[1:] = data[:, 3 + k_max:].T
    params = ModelParams(kappa=meta["kappa"], gamma=meta["gamma"], alpha0=meta["alpha0"])
    return FourierRadialField(params=params, dr=float(meta["dr"]), tau=float(meta["tau"]),
                              a=a, b=b)
