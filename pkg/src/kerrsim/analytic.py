"""Closed-form results for the Kerr oscillator.

Everything in this module is exact (up to floating point): number-basis
phases, kitten-state coefficients, normally ordered correlation functions of
the closed system, ordering conversions, quadrature-moment decompositions,
quadrature marginals, recurrence-time bookkeeping and the freely decaying cat
state. These serve as oracles for the PDE and Fock-space solvers.

Quadrature convention: ``alpha = (X + iP)/sqrt(2)``, so a coherent state with
real amplitude ``alpha0`` has ``<X> = sqrt(2)*alpha0`` and vacuum variance
``<X^2> = 1/2``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Literal

import numpy as np
from scipy.special import gammainc, gammaln

from .params import ModelParams

Ordering = Literal["normal", "symmetric", "antinormal"]

POISSON_TAIL_TOL = 1e-12


@dataclass(frozen=True)
class OrderedMonomial:
    """A product of ``mu`` creation and ``nu`` annihilation operators under a
    given operator ordering."""

    mu: int
    nu: int
    ordering: Ordering = "normal"

    def __post_init__(self):
        if self.mu < 0 or self.nu < 0:
            raise ValueError("operator powers must be nonnegative")
        if self.ordering not in ("normal", "symmetric", "antinormal"):
            raise ValueError(f"unknown ordering {self.ordering!r}")


@dataclass(frozen=True)
class NormalExpansion:
    """A finite sum ``sum_i c_i adag^mu_i a^nu_i`` of normally ordered
    monomials with positive rational coefficients.

    All terms share the same ``mu - nu`` (ordering conversion removes ladder
    operators in matched pairs).
    """

    terms: tuple[tuple[Fraction, int, int], ...]

    def __post_init__(self):
        if not self.terms:
            raise ValueError("empty expansion")
        diffs = {mu - nu for _, mu, nu in self.terms}
        if len(diffs) > 1:
            raise ValueError(f"terms mix different mu-nu offsets: {diffs}")
        if any(c <= 0 for c, _, _ in self.terms):
            raise ValueError("coefficients must be positive")


@dataclass(frozen=True)
class QuadratureSpec:
    """Moment order ``n`` and homodyne angle ``theta`` of ``X_theta^n``."""

    n: int
    theta: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("moment order must be >= 1")
        if not 0.0 <= self.theta < 2.0 * math.pi:
            raise ValueError("theta must lie in [0, 2*pi)")


@dataclass(frozen=True)
class KittenState:
    """Superposition of N coherent states on the circle of radius alpha0.

    ``f[k]`` multiplies the component with amplitude ``alpha0*exp(i*k*pi/N)``
    for ``k = 0..2N-1``; exactly N entries are nonzero, each of squared
    modulus 1/N.
    """

    M: int
    N: int
    f: tuple[complex, ...]
    alpha0: float

    @property
    def amplitudes(self) -> np.ndarray:
        """Coherent amplitudes paired with the coefficients ``f``."""
        k = np.arange(2 * self.N)
        return self.alpha0 * np.exp(1j * k * np.pi / self.N)

    @property
    def formation_time(self) -> float:
        """Kerr phase ``kappa*t`` at which the superposition forms."""
        return 2.0 * math.pi * self.M / self.N


def closed_state_phase(n: int, t: float, params: ModelParams) -> complex:
    """Phase factor acquired by the number state ``|n>`` after time ``t`` of
    closed Kerr evolution."""
    if n < 0:
        raise ValueError("n must be >= 0")
    return cmath.exp(-0.5j * params.kappa * t * n * (n - 1))


def kitten_coefficients(M: int, N: int, alpha0: float = 1.0) -> KittenState:
    """Coefficients of the N-component superposition formed at
    ``kappa*t = 2*pi*M/N``.

    Parameters
    ----------
    M, N : int
        Positive coprime integers selecting the formation time.
    alpha0 : float
        Amplitude of the initial coherent state.

    Returns
    -------
    KittenState
        With ``f_k = (1/2N) sum_n exp(-i*(pi/N)*(n*k - M*n*(n-1)))``.
    """
    if M < 1 or N < 1:
        raise ValueError("M and N must be positive")
    if math.gcd(M, N) != 1:
        raise ValueError(f"(M, N) = ({M}, {N}) are not coprime")
    n = np.arange(2 * N)
    k = np.arange(2 * N)[:, None]
    f = np.exp(-1j * (np.pi / N) * (n * k - M * n * (n - 1))).sum(axis=1) / (2 * N)
    return KittenState(M=M, N=N, f=tuple(f.tolist()), alpha0=alpha0)


def normal_expectation(mu: int, nu: int, t: float, params: ModelParams) -> complex:
    """Normally ordered correlation ``<adag^mu a^nu>(t)`` of the closed system
    for an initial coherent state.

    Valid only for ``gamma = 0``; the open system has no such single-term
    closed form.
    """
    if params.gamma != 0.0:
        raise ValueError("normal_expectation is a closed-system formula (gamma must be 0)")
    a0 = params.alpha0
    kt = params.kappa * t
    d = mu - nu
    phase = 0.5 * kt * (mu * (mu - 1) - nu * (nu - 1))
    n0 = a0 * a0
    return (
        a0 ** (mu + nu)
        * cmath.exp(1j * phase)
        * math.exp(-n0 * (1.0 - math.cos(d * kt)))
        * cmath.exp(1j * n0 * math.sin(d * kt))
    )


def ordered_to_normal(mono: OrderedMonomial) -> NormalExpansion:
    """Rewrite an s-ordered monomial as a sum of normally ordered ones.

    The conversion coefficient of the term with ``g`` ladder pairs removed is
    ``mu! nu! / (g! (mu-g)! (nu-g)!) * w**g`` with ``w = 1/2`` for symmetric
    and ``w = 1`` for antinormal ordering.
    """
    if mono.ordering == "normal":
        return NormalExpansion(terms=((Fraction(1), mono.mu, mono.nu),))
    w = Fraction(1, 2) if mono.ordering == "symmetric" else Fraction(1)
    mu, nu = mono.mu, mono.nu
    terms = []
    for g in range(min(mu, nu) + 1):
        c = Fraction(math.factorial(mu) * math.factorial(nu),
                     math.factorial(g) * math.factorial(mu - g) * math.factorial(nu - g))
        terms.append((c * w**g, mu - g, nu - g))
    return NormalExpansion(terms=tuple(terms))


def sym_to_normal(mono: OrderedMonomial) -> NormalExpansion:
    """Expansion of a symmetrically ordered monomial over normal ordering."""
    if mono.ordering != "symmetric":
        raise ValueError("sym_to_normal expects a symmetrically ordered monomial")
    return ordered_to_normal(mono)


def quadrature_decomposition(spec: QuadratureSpec) -> list[tuple[complex, OrderedMonomial]]:
    """Expand ``X_theta^n`` over symmetrically ordered ladder monomials.

    ``X_theta = (a*exp(-i*theta) + adag*exp(i*theta))/sqrt(2)`` is a single
    Hermitian operator, so its n-th power equals its own Weyl symmetrization;
    the binomial expansion of the classical symbol then gives

    ``X_theta^n = 2^(-n/2) sum_j C(n,j) e^(i*theta*(2j-n)) {adag^j a^(n-j)}_sym``.
    """
    n, theta = spec.n, spec.theta
    out = []
    scale = 2.0 ** (-0.5 * n)
    for j in range(n + 1):
        coeff = scale * math.comb(n, j) * cmath.exp(1j * theta * (2 * j - n))
        out.append((coeff, OrderedMonomial(mu=j, nu=n - j, ordering="symmetric")))
    return out


def closed_quadrature_moment(spec: QuadratureSpec, t: float, params: ModelParams) -> float:
    """Exact ``<X_theta^n>(t)`` of the closed system from the normally ordered
    correlation functions."""
    total = 0.0 + 0.0j
    for coeff, mono in quadrature_decomposition(spec):
        for c, mu, nu in ordered_to_normal(mono).terms:
            total += coeff * float(c) * normal_expectation(mu, nu, t, params)
    if abs(total.imag) > 1e-9 * max(1.0, abs(total.real)):
        raise ArithmeticError(f"nonreal quadrature moment: {total}")
    return total.real


def default_n_max(alpha0: float, tail_tol: float = POISSON_TAIL_TOL) -> int:
    """Smallest Fock cutoff whose Poisson tail mass is below ``tail_tol``."""
    lam = alpha0 * alpha0
    n = max(8, int(math.ceil(lam)))
    while poisson_tail(n, lam) >= tail_tol:
        n += 1
    return n


def poisson_tail(n_max: int, lam: float) -> float:
    """P(X > n_max) for X ~ Poisson(lam)."""
    return float(gammainc(n_max + 1, lam))


def hermite_functions(n_max: int, x: np.ndarray) -> np.ndarray:
    """Normalized harmonic-oscillator eigenfunctions ``u_0 .. u_n_max`` at
    the points ``x``, via the overflow-safe three-term recurrence
    ``u_{n+1} = x*sqrt(2/(n+1))*u_n - sqrt(n/(n+1))*u_{n-1}``.
    """
    x = np.asarray(x, dtype=float)
    u = np.empty((n_max + 1,) + x.shape)
    u[0] = np.pi ** (-0.25) * np.exp(-0.5 * x * x)
    if n_max >= 1:
        u[1] = math.sqrt(2.0) * x * u[0]
    for n in range(1, n_max):
        u[n + 1] = x * math.sqrt(2.0 / (n + 1)) * u[n] - math.sqrt(n / (n + 1)) * u[n - 1]
    return u


def marginal_probability(
    x: float | np.ndarray,
    spec: QuadratureSpec,
    t: float,
    params: ModelParams,
    n_max: int | None = None,
) -> float | np.ndarray:
    """Quadrature probability density ``P(X_theta, t)`` of the closed system.

    The wave function is summed in the number basis with amplitudes
    ``c_n exp(-i*kappa*t*n*(n-1)/2) exp(-i*n*theta) u_n(x)``; the angle enters
    as the phase-space rotation ``exp(-i*n*theta)`` (validated against the
    brute-force Fock oracle in the tests).

    Raises ``ValueError`` when ``n_max`` leaves more than 1e-12 of Poisson
    weight above the cutoff.
    """
    if params.gamma != 0.0:
        raise ValueError("marginal_probability is a closed-system formula (gamma must be 0)")
    a0 = params.alpha0
    lam = a0 * a0
    if n_max is None:
        n_max = default_n_max(a0)
    tail = poisson_tail(n_max, lam)
    if tail >= POISSON_TAIL_TOL:
        raise ValueError(
            f"n_max={n_max} leaves Poisson tail {tail:.3e} >= {POISSON_TAIL_TOL}; "
            f"need n_max >= {default_n_max(a0)}"
        )
    n = np.arange(n_max + 1)
    if a0 > 0:
        log_c = -0.5 * lam + n * math.log(a0) - 0.5 * gammaln(n + 1)
    else:
        log_c = np.where(n == 0, 0.0, -np.inf)
    amp = np.exp(log_c) * np.exp(
        -0.5j * params.kappa * t * n * (n - 1) - 1j * n * spec.theta
    )
    xx = np.atleast_1d(np.asarray(x, dtype=float))
    u = hermite_functions(n_max, xx)
    psi = amp @ u
    prob = np.abs(psi) ** 2
    return prob if np.ndim(x) else float(prob[0])


def recurrence_period(mu: int, nu: int, params: ModelParams) -> float | None:
    """Recurrence period ``2*pi/(|mu-nu|*kappa)`` of ``|<adag^mu a^nu>|``;
    ``None`` for mu = nu (powers of the number operator never recur)."""
    if mu == nu:
        return None
    return 2.0 * math.pi / (abs(mu - nu) * params.kappa)


@dataclass(frozen=True)
class RecurrenceTime:
    """A recurrence of ``<X_theta^n>`` with its (M, N) witnesses.

    Multiple witnesses at the same time signal contributions from several
    terms of the quadrature expansion and hence a larger deviation.
    """

    t: float
    witnesses: tuple[tuple[int, int], ...]


def recurrence_times(n: int, params: ModelParams, t_max: float) -> list[RecurrenceTime]:
    """All recurrence times of ``<X_theta^n>`` up to ``t_max``.

    These are ``kappa*t = 2*pi*M/N`` with integer ``M >= 1``, ``N <= n`` and
    ``N`` of the same parity as ``n``. Coincident times are merged but keep
    every (M, N) witness.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if t_max <= 0:
        raise ValueError("t_max must be > 0")
    found: dict[Fraction, list[tuple[int, int]]] = {}
    start = 2 if n % 2 == 0 else 1
    for N in range(start, n + 1, 2):
        M = 1
        while 2.0 * math.pi * M / (N * params.kappa) <= t_max * (1 + 1e-15):
            found.setdefault(Fraction(M, N), []).append((M, N))
            M += 1
    out = [
        RecurrenceTime(t=2.0 * math.pi * float(q) / params.kappa, witnesses=tuple(w))
        for q, w in sorted(found.items())
    ]
    return out


KittenCase = Literal["number-power", "aligned", "suppressed"]


def kitten_expectation_case(mu: int, nu: int, M: int, N: int) -> KittenCase:
    """Classify ``<adag^mu a^nu>`` on the (M, N) kitten state.

    ``number-power``: mu = nu, the value is ``<n>^mu`` exactly.
    ``aligned``: mu - nu is a nonzero multiple of N; the kitten state is an
    eigenstate of ``a^N`` and the value survives at leading order.
    ``suppressed``: everything else; the value is of the order of the overlap
    between neighboring kittens.
    """
    if math.gcd(M, N) != 1:
        raise ValueError(f"(M, N) = ({M}, {N}) are not coprime")
    if mu == nu:
        return "number-power"
    if (mu - nu) % N == 0:
        return "aligned"
    return "suppressed"


def kitten_expectation_value(mu: int, nu: int, M: int, N: int, alpha0: float) -> complex:
    """Leading-order value of ``<adag^mu a^nu>`` on the (M, N) kitten state.

    The aligned case carries a sign ``(-1)^|p|`` exactly when N is even and M
    is odd (the kitten circle is rotated by half a slot in that case); the
    suppressed case returns 0, exact only up to neighboring-kitten overlaps.
    """
    case = kitten_expectation_case(mu, nu, M, N)
    nbar = alpha0 * alpha0
    if case == "number-power":
        return complex(nbar**mu)
    if case == "aligned":
        p = (mu - nu) // N
        sign = -1.0 if (N % 2 == 0 and M % 2 == 1) else 1.0
        return complex(sign ** abs(p) * alpha0 ** (mu + nu))
    return 0.0 + 0.0j


def cat_fringe_weight(t: float, x0: float, gamma: float, exact_overlap: bool = True) -> float:
    """Interference weight of a freely decaying cat.

    Exact form ``exp(-x0^2 (1 - e^(-gamma t)))`` from the overlap power
    ``<+x0|-x0>^(1-e^(-gamma t))``; the short-time flag uses the linearized
    rate ``exp(-x0^2 gamma t)`` instead.
    """
    if exact_overlap:
        return math.exp(-x0 * x0 * (1.0 - math.exp(-gamma * t)))
    return math.exp(-x0 * x0 * gamma * t)


def decaying_cat_wigner(
    x: float | np.ndarray,
    p: float | np.ndarray,
    t: float,
    x0: float,
    gamma: float,
    exact_overlap: bool = True,
) -> float | np.ndarray:
    """Wigner function of a cat displaced to ``+-x0`` along P decaying under
    pure photon loss, normalized so that ``int W dX dP = 1``.

    Two lobes at ``+-x0*exp(-gamma t/2)`` plus a fringe term whose weight
    decays per :func:`cat_fringe_weight`.
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    x0t = x0 * math.exp(-0.5 * gamma * t)
    w = cat_fringe_weight(t, x0, gamma, exact_overlap)

    def vac(px, pp):
        return np.exp(-(px * px + pp * pp)) / math.pi

    out = 0.5 * vac(x, p - x0t) + 0.5 * vac(x, p + x0t) + w * np.sin(2.0 * x * x0t) * vac(x, p)
    return out if out.ndim else float(out)


_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite.hermgauss(180)


def decaying_cat_moment(
    n: int,
    m: int,
    t: float,
    x0: float,
    gamma: float,
    component: Literal["open", "closed", "mixture"] = "open",
    exact_overlap: bool = True,
) -> float:
    """Moment ``<X^n P^m>`` of the decaying cat or of its convex pieces.

    ``closed`` keeps the full fringe while the lobes lose energy; ``mixture``
    drops the fringe; ``open`` weights the fringe by the decoherence factor.
    The open state is then exactly the convex combination
    ``w(t)*closed + (1-w(t))*mixture``.
    """
    x0t = x0 * math.exp(-0.5 * gamma * t)
    s, w = _GH_NODES, _GH_WEIGHTS
    # X and P integrals factorize; each is poly-times-Gaussian (plus a sine).
    x_plain = float(w @ s**n) / math.sqrt(math.pi)
    p_up = float(w @ (s + x0t) ** m) / math.sqrt(math.pi)
    p_dn = float(w @ (s - x0t) ** m) / math.sqrt(math.pi)
    lobes = 0.5 * (p_up + p_dn) * x_plain
    fringe = (
        float(w @ (s**n * np.sin(2.0 * x0t * s)))
        * float(w @ s**m)
        / math.pi
    )
    if component == "mixture":
        return lobes
    if component == "closed":
        return lobes + fringe
    return lobes + cat_fringe_weight(t, x0, gamma, exact_overlap) * fringe
