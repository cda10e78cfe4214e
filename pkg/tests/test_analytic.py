import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from kerrsim import analytic as an
from kerrsim import fock as fk
from kerrsim.params import ModelParams

from conftest import brute_force_symmetric, ladder_matrices


class TestClosedStatePhase:
    def test_low_levels_are_phase_free(self, closed_params):
        for n in (0, 1):
            assert an.closed_state_phase(n, 0.37, closed_params) == 1.0

    def test_full_period_revival(self, closed_params):
        assert an.closed_state_phase(3, 2 * math.pi, closed_params) == pytest.approx(1.0)

    def test_rejects_negative_level(self, closed_params):
        with pytest.raises(ValueError):
            an.closed_state_phase(-1, 0.0, closed_params)


class TestKittenCoefficients:
    def test_cat_state_structure(self):
        ks = an.kitten_coefficients(1, 2, alpha0=2.0)
        f = np.array(ks.f)
        w = np.abs(f) ** 2
        assert np.sum(w > 1e-12) == 2
        assert np.allclose(w[w > 1e-12], 0.5, atol=1e-12)
        # and the reconstructed superposition is the exactly evolved state
        n_trunc = 40
        vec = sum(fc * _coherent_complex(amp, n_trunc)
                  for fc, amp in zip(ks.f, ks.amplitudes))
        want = fk.kerr_evolved_vector(2.0, n_trunc, math.pi)
        assert np.max(np.abs(vec - want)) < 1e-10

    def test_single_revival_component(self):
        ks = an.kitten_coefficients(1, 1)
        w = np.abs(np.array(ks.f)) ** 2
        assert np.sum(w > 1e-12) == 1
        assert np.max(w) == pytest.approx(1.0, abs=1e-12)

    def test_nine_kitten(self):
        ks = an.kitten_coefficients(2, 9)
        w = np.abs(np.array(ks.f)) ** 2
        assert np.sum(w > 1e-12) == 9
        assert np.allclose(w[w > 1e-12], 1.0 / 9.0, atol=1e-12)

    def test_rejects_non_coprime(self):
        with pytest.raises(ValueError):
            an.kitten_coefficients(2, 4)

    @pytest.mark.parametrize("N", range(1, 13))
    def test_weights_for_all_coprime_pairs(self, N):
        for M in range(1, N + 1):
            if math.gcd(M, N) != 1:
                continue
            w = np.abs(np.array(an.kitten_coefficients(M, N).f)) ** 2
            nonzero = w[w > 1e-12]
            assert len(nonzero) == N
            assert np.max(np.abs(nonzero - 1.0 / N)) < 1e-12


def _coherent_complex(amp: complex, n_trunc: int) -> np.ndarray:
    n = np.arange(n_trunc + 1)
    from scipy.special import gammaln

    mag = np.exp(-0.5 * abs(amp) ** 2 + n * math.log(max(abs(amp), 1e-300))
                 - 0.5 * gammaln(n + 1))
    return mag * np.exp(1j * n * np.angle(amp))


class TestNormalExpectation:
    def test_number_conservation(self, closed_params):
        assert an.normal_expectation(1, 1, 0.93, closed_params) == pytest.approx(4.0)

    def test_initial_amplitude(self, closed_params):
        assert an.normal_expectation(0, 1, 0.0, closed_params) == pytest.approx(2.0)

    def test_collapse_at_half_period(self, closed_params):
        got = an.normal_expectation(0, 1, math.pi, closed_params)
        assert got == pytest.approx(2.0 * math.exp(-8.0), rel=1e-12)

    def test_matches_fock_vector_evolution(self, closed_params):
        n_trunc = 60
        for (mu, nu, kt) in [(0, 1, 0.3), (2, 0, 1.1), (3, 1, 2.0), (1, 4, 0.5)]:
            v = fk.kerr_evolved_vector(2.0, n_trunc, kt)
            rho = fk.density_from_vector(v)
            got = fk.expectation(rho, an.OrderedMonomial(mu, nu))
            want = an.normal_expectation(mu, nu, kt, closed_params)
            assert abs(got - want) < 1e-12 * max(1.0, abs(want))

    def test_periodicity_in_magnitude(self, closed_params):
        rng = np.random.default_rng(7)
        for mu, nu in [(0, 1), (2, 0), (3, 1)]:
            T = an.recurrence_period(mu, nu, closed_params)
            for t in rng.uniform(0.0, 4.0, 100):
                v0 = abs(an.normal_expectation(mu, nu, t, closed_params))
                v1 = abs(an.normal_expectation(mu, nu, t + T, closed_params))
                assert abs(v0 - v1) < 1e-12 * max(1.0, v0)

    def test_rejects_open_system(self):
        p = ModelParams(kappa=1.0, gamma=0.1, alpha0=2.0)
        with pytest.raises(ValueError):
            an.normal_expectation(0, 1, 0.1, p)


class TestOrderingConversion:
    def test_single_operator_passthrough(self):
        exp = an.sym_to_normal(an.OrderedMonomial(1, 0, "symmetric"))
        assert exp.terms == ((Fraction(1), 1, 0),)

    def test_photon_number(self):
        exp = an.sym_to_normal(an.OrderedMonomial(1, 1, "symmetric"))
        assert exp.terms == ((Fraction(1), 1, 1), (Fraction(1, 2), 0, 0))

    def test_two_two(self):
        exp = an.sym_to_normal(an.OrderedMonomial(2, 2, "symmetric"))
        assert exp.terms == ((Fraction(1), 2, 2), (Fraction(2), 1, 1),
                             (Fraction(1, 2), 0, 0))

    def test_rejects_wrong_ordering(self):
        with pytest.raises(ValueError):
            an.sym_to_normal(an.OrderedMonomial(1, 1, "normal"))

    def test_antinormal_commutator(self):
        # a adag = adag a + 1
        exp = an.ordered_to_normal(an.OrderedMonomial(1, 1, "antinormal"))
        assert exp.terms == ((Fraction(1), 1, 1), (Fraction(1), 0, 0))

    @pytest.mark.parametrize("mu", range(5))
    @pytest.mark.parametrize("nu", range(5))
    def test_brute_force_symmetrization(self, mu, nu):
        """Eq-level check against averaging every operator ordering."""
        n_trunc = 25
        v = fk.coherent_vector(1.3, n_trunc)
        rho = fk.density_from_vector(v)
        got = fk.expectation(rho, an.OrderedMonomial(mu, nu, "symmetric"))
        want = v.conj() @ (brute_force_symmetric(mu, nu, n_trunc) @ v)
        assert abs(got - want) < 1e-10


class TestQuadratureDecomposition:
    def test_first_moment(self):
        terms = an.quadrature_decomposition(an.QuadratureSpec(1, 0.0))
        coeffs = {(m.mu, m.nu): c for c, m in terms}
        assert coeffs[(1, 0)] == pytest.approx(1.0 / math.sqrt(2.0))
        assert coeffs[(0, 1)] == pytest.approx(1.0 / math.sqrt(2.0))

    def test_offsets_have_moment_parity(self):
        for n in (2, 5):
            for _, mono in an.quadrature_decomposition(an.QuadratureSpec(n, 0.3)):
                d = mono.mu - mono.nu
                assert abs(d) <= n
                assert (d - n) % 2 == 0

    @pytest.mark.parametrize("theta", [0.0, 0.7, 2.0])
    def test_sixth_power_against_matrix_oracle(self, theta):
        n_trunc = 45
        a, ad = ladder_matrices(n_trunc)
        x = (a + ad) / math.sqrt(2.0)
        p = (a - ad) / (1j * math.sqrt(2.0))
        xt = math.cos(theta) * x + math.sin(theta) * p
        op = np.linalg.matrix_power(xt, 6)
        v = fk.coherent_vector(2.0, n_trunc)
        want = (v.conj() @ (op @ v)).real
        rho = fk.density_from_vector(v)
        got = fk.quadrature_moment_fock(rho, an.QuadratureSpec(6, theta))
        assert abs(got - want) < 1e-10 * max(1.0, abs(want))

    @pytest.mark.parametrize("n", range(1, 9))
    def test_recombination_gives_coherent_moments(self, n, closed_params):
        """At t = 0 the decomposition must reproduce the Gaussian moments of
        a displaced vacuum, computed independently by quadrature."""
        theta = 0.9
        got = an.closed_quadrature_moment(an.QuadratureSpec(n, theta), 0.0,
                                          closed_params)
        mean = math.sqrt(2.0) * closed_params.alpha0 * math.cos(theta)
        nodes, weights = np.polynomial.hermite.hermgauss(60)
        want = weights @ (mean + nodes) ** n / math.sqrt(math.pi)
        assert abs(got - want) < 1e-10 * max(1.0, abs(want))


class TestMarginalProbability:
    def test_initial_gaussian(self, closed_params):
        xs = np.linspace(-2.0, 8.0, 41)
        got = an.marginal_probability(xs, an.QuadratureSpec(1, 0.0), 0.0, closed_params)
        want = np.exp(-(xs - 2.0 * math.sqrt(2.0)) ** 2) / math.sqrt(math.pi)
        assert np.max(np.abs(got - want)) < 1e-6

    @pytest.mark.parametrize("theta", [0.9, math.pi / 2, 4.0])
    def test_rotated_gaussian_center(self, theta, closed_params):
        xs = np.linspace(-6.0, 6.0, 31)
        got = an.marginal_probability(xs, an.QuadratureSpec(1, theta), 0.0,
                                      closed_params)
        center = math.sqrt(2.0) * closed_params.alpha0 * math.cos(theta)
        want = np.exp(-(xs - center) ** 2) / math.sqrt(math.pi)
        assert np.max(np.abs(got - want)) < 1e-6

    def test_cat_marginals(self):
        """At the cat time the fringe direction carries 1 + sin(2 x0 x) and
        the conjugate direction is bimodal (cross-checked analytically)."""
        p = ModelParams(kappa=1.0, gamma=0.0, alpha0=3.0)
        x0 = math.sqrt(2.0) * 3.0
        xs = np.linspace(-4.0, 4.0, 33)
        fringe = an.marginal_probability(xs, an.QuadratureSpec(1, 0.0), math.pi, p)
        want = np.exp(-xs**2) * (1.0 + np.sin(2.0 * x0 * xs)) / math.sqrt(math.pi)
        assert np.max(np.abs(fringe - want)) < 1e-6
        bimodal = an.marginal_probability(
            xs, an.QuadratureSpec(1, math.pi / 2), math.pi, p)
        want2 = 0.5 * (np.exp(-(xs - x0) ** 2) + np.exp(-(xs + x0) ** 2)) / math.sqrt(math.pi)
        assert np.max(np.abs(bimodal - want2)) < 1e-6

    def test_normalization(self):
        rng = np.random.default_rng(3)
        p = ModelParams(kappa=1.0, gamma=0.0, alpha0=2.5)
        for theta, kt in zip(rng.uniform(0, 2 * math.pi, 5), rng.uniform(0, 4, 5)):
            total, _ = quad(
                lambda x: an.marginal_probability(x, an.QuadratureSpec(1, theta), kt, p),
                -12, 12, limit=300)
            assert abs(total - 1.0) < 1e-8

    def test_rejects_insufficient_cutoff(self, closed_params):
        with pytest.raises(ValueError, match="tail"):
            an.marginal_probability(0.0, an.QuadratureSpec(1, 0.0), 0.1,
                                    closed_params, n_max=6)


class TestRecurrenceBookkeeping:
    def test_periods(self, closed_params):
        assert an.recurrence_period(6, 0, closed_params) == pytest.approx(math.pi / 3)
        assert an.recurrence_period(3, 3, closed_params) is None
        assert an.recurrence_period(0, 1, closed_params) == pytest.approx(2 * math.pi)

    def test_first_recurrence_of_sixth_moment(self, closed_params):
        times = an.recurrence_times(6, closed_params, math.pi / 2)
        assert times[0].t == pytest.approx(math.pi / 3)
        assert (1, 6) in times[0].witnesses

    def test_symmetry_mismatch_excluded(self, closed_params):
        times = an.recurrence_times(6, closed_params, 1.5)
        vals = [rt.t for rt in times]
        for bad in (2 * math.pi / 9, 2 * math.pi / 5):
            assert all(abs(v - bad) > 1e-9 for v in vals)

    def test_second_moment_enumeration(self, closed_params):
        times = an.recurrence_times(2, closed_params, 2 * math.pi)
        as_tuples = [(rt.t, rt.witnesses) for rt in times]
        assert len(as_tuples) == 2
        assert as_tuples[0][0] == pytest.approx(math.pi)
        assert as_tuples[0][1] == ((1, 2),)
        assert as_tuples[1][0] == pytest.approx(2 * math.pi)
        assert as_tuples[1][1] == ((2, 2),)

    def test_coincident_witnesses_merge(self, closed_params):
        times = an.recurrence_times(6, closed_params, 2 * math.pi + 1e-9)
        last = [rt for rt in times if abs(rt.t - 2 * math.pi) < 1e-9]
        assert len(last) == 1
        assert set(last[0].witnesses) == {(2, 2), (4, 4), (6, 6)}


class TestKittenExpectationCases:
    def test_number_power(self):
        assert an.kitten_expectation_case(2, 2, 1, 6) == "number-power"

    def test_aligned_with_sign(self):
        assert an.kitten_expectation_case(6, 0, 1, 6) == "aligned"
        val = an.kitten_expectation_value(6, 0, 1, 6, alpha0=2.0)
        assert val.real < 0  # N even, M odd

    def test_suppressed_on_symmetry_mismatch(self):
        assert an.kitten_expectation_case(6, 0, 2, 9) == "suppressed"

    def test_aligned_against_fock_oracle(self):
        """Exactly evolved kitten states reproduce the case values."""
        alpha0, n_trunc = 3.0, 60
        for (M, N, mu, nu) in [(1, 2, 2, 0), (1, 2, 4, 2), (1, 3, 3, 0), (1, 4, 4, 0)]:
            kt = 2 * math.pi * M / N
            rho = fk.density_from_vector(fk.kerr_evolved_vector(alpha0, n_trunc, kt))
            got = fk.expectation(rho, an.OrderedMonomial(mu, nu))
            want = an.kitten_expectation_value(mu, nu, M, N, alpha0)
            overlap = math.exp(-alpha0**2 * (1 - math.cos(2 * math.pi / N)))
            assert abs(got - want) <= 20.0 * overlap * alpha0 ** (mu + nu)


class TestDecayingCat:
    def test_initial_fringe_weight(self):
        assert an.cat_fringe_weight(0.0, 3.0, 0.5) == 1.0

    def test_short_time_weight(self):
        x0, g = 4.0, 0.25
        t = 0.001
        exact = an.cat_fringe_weight(t, x0, g, exact_overlap=True)
        lin = math.exp(-x0 * x0 * g * t)
        assert exact == pytest.approx(lin, rel=1e-3)

    def test_fringe_decay_rate_fit(self):
        """Least-squares slope of the linearized fringe over gamma*t <= 0.02."""
        x0, g = math.sqrt(2) * 3.0, 0.7
        ts = np.linspace(0.0, 0.02 / g, 50)
        w = np.array([an.cat_fringe_weight(t, x0, g, exact_overlap=False) for t in ts])
        slope = np.polyfit(ts, np.log(w), 1)[0]
        assert abs(-slope - x0 * x0 * g) < 1e-6 * x0 * x0 * g

    def test_normalization(self):
        nodes, weights = np.polynomial.hermite.hermgauss(120)
        x = nodes[:, None]
        p = nodes[None, :]
        w2 = weights[:, None] * weights[None, :]
        vals = an.decaying_cat_wigner(x, p, 0.3, math.sqrt(2) * 2.0, 0.4)
        total = np.sum(w2 * vals * np.exp(x**2 + p**2))
        assert abs(total - 1.0) < 1e-6

    def test_open_state_is_convex_combination(self):
        x0, g, t = math.sqrt(2) * 2.0, 0.3, 0.8
        for (n, m) in [(1, 0), (3, 0), (3, 2)]:
            mo = an.decaying_cat_moment(n, m, t, x0, g, "open")
            mc = an.decaying_cat_moment(n, m, t, x0, g, "closed")
            mm = an.decaying_cat_moment(n, m, t, x0, g, "mixture")
            w = an.cat_fringe_weight(t, x0, g)
            assert mo == pytest.approx(w * mc + (1 - w) * mm, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=1, max_value=12), st.integers(min_value=1, max_value=12))
def test_kitten_weights_property(M, N):
    """Any coprime pair gives N components of weight 1/N."""
    if math.gcd(M, N) != 1:
        return
    w = np.abs(np.array(an.kitten_coefficients(M, N).f)) ** 2
    nz = w[w > 1e-12]
    assert len(nz) == N
    assert np.max(np.abs(nz - 1.0 / N)) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=6), st.integers(min_value=0, max_value=6),
       st.integers(min_value=0, max_value=8))
def test_angular_weight_parity_property(m, n, k):
    from kerrsim.phasespace import angular_weight

    if (m + n + k) % 2 == 1:
        assert angular_weight(m, n, k, "cos") == 0.0
        assert angular_weight(m, n, k, "sin") == 0.0
