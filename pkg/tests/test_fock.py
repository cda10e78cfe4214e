import math

import numpy as np
import pytest

from kerrsim import analytic as an
from kerrsim import fock as fk
from kerrsim.params import ModelParams


@pytest.fixture(scope="module")
def damped_params():
    return ModelParams(kappa=1.0, gamma=0.05, alpha0=2.0)


@pytest.fixture(scope="module")
def coherent40():
    return fk.coherent_density(2.0, 40)


class TestStripeRate:
    def test_ground_state_stationary(self, damped_params):
        assert fk.stripe_rate(0, 0, damped_params).value == 0.0

    def test_diagonal_is_real(self, damped_params):
        for j in (1, 3, 7):
            v = fk.stripe_rate(j, j, damped_params).value
            assert v.imag == 0.0
            assert v.real == pytest.approx(damped_params.gamma * j)

    def test_closed_system_frequency(self):
        p = ModelParams(kappa=1.0, gamma=0.0, alpha0=2.0)
        assert fk.stripe_rate(2, 0, p).value == pytest.approx(1j)


class TestStripeSolution:
    def test_terminating_coefficient(self, coherent40, damped_params):
        sol = fk.build_stripe_solution(3, coherent40, damped_params)
        assert sol.A[0, 0] == pytest.approx(coherent40.rho[40, 37])
        assert np.allclose(np.triu(sol.A, 1), 0.0)

    def test_second_coefficient_matches_hand_recursion(self, coherent40, damped_params):
        m = 2
        sol = fk.build_stripe_solution(m, coherent40, damped_params)
        N = 40
        g1 = damped_params.gamma * math.sqrt(N * (N - m))
        f10 = g1 / (sol.rates[1] - sol.rates[0])
        expect = coherent40.rho[N - 1, N - m - 1] - f10 * coherent40.rho[N, N - m]
        assert sol.A[1, 1] == pytest.approx(expect)

    def test_t0_reconstruction(self, coherent40, damped_params):
        worst = max(
            fk.build_stripe_solution(m, coherent40, damped_params).recon_error
            for m in range(41)
        )
        assert worst < 1e-10

    def test_rejects_closed_system(self, coherent40):
        p = ModelParams(kappa=1.0, gamma=0.0, alpha0=2.0)
        with pytest.raises(ValueError):
            fk.build_stripe_solution(1, coherent40, p)


class TestEvolveAnalytic:
    def test_closed_full_period_revival(self, coherent40):
        p = ModelParams(kappa=1.0, gamma=0.0, alpha0=2.0)
        out = fk.evolve_analytic(coherent40, 2 * math.pi, p)
        assert np.max(np.abs(out.rho - coherent40.rho)) < 1e-10

    def test_pure_loss_keeps_coherent_form(self):
        # kappa = 0: the coherent state just shrinks
        p = ModelParams(kappa=0.0, gamma=0.4, alpha0=2.0)
        rho0 = fk.coherent_density(2.0, 40)
        for t in (0.5, 2.0):
            out = fk.evolve_analytic(rho0, t, p)
            want = fk.coherent_density(2.0 * math.exp(-0.2 * t), 40)
            assert np.max(np.abs(out.rho - want.rho)) < 1e-10
            assert out.mean_photon_number() == pytest.approx(
                4.0 * math.exp(-0.4 * t), rel=1e-12)

    def test_number_decay_with_kerr_on(self, coherent40, damped_params):
        out = fk.evolve_analytic(coherent40, 3.0, damped_params)
        assert out.mean_photon_number() == pytest.approx(
            4.0 * math.exp(-0.15), rel=1e-11)

    def test_matches_direct_integrator(self, coherent40, damped_params):
        r_an = fk.evolve_analytic(coherent40, 1.0, damped_params)
        r_di = fk.evolve_direct(coherent40, 1.0, damped_params, tol=1e-12)
        assert np.max(np.abs(r_an.rho - r_di.rho)) < 1e-8

    def test_refuses_when_cancellation_dominates(self):
        p = ModelParams(kappa=1.0, gamma=0.1, alpha0=6.0)
        rho0 = fk.coherent_density(6.0)
        with pytest.raises(ArithmeticError, match="cancellation"):
            fk.AnalyticPropagator(rho0, p)


class TestEvolveDirect:
    def test_trace_preserved(self, coherent40, damped_params):
        tol = 1e-10
        for t in (0.3, 1.7):
            out = fk.evolve_direct(coherent40, t, damped_params, tol=tol)
            assert abs(np.trace(out.rho) - 1.0) < 10 * tol

    def test_closed_matches_normal_expectation(self, coherent40):
        p = ModelParams(kappa=1.0, gamma=0.0, alpha0=2.0)
        ts = np.array([0.4, 1.0])
        outs = fk.evolve_direct(coherent40, ts, p, tol=1e-12)
        for t, out in zip(ts, outs):
            got = fk.expectation(out, an.OrderedMonomial(0, 1))
            want = an.normal_expectation(0, 1, t, p)
            assert abs(got - want) < 1e-8

    def test_pure_loss_adjoint_moment_flow(self):
        """d<X^n>/dt = -(n g/2)<X^n> + g n(n-1)/4 <X^{n-2}> under loss alone,
        checked by centered differencing of the evolved series."""
        g = 0.3
        p = ModelParams(kappa=0.0, gamma=g, alpha0=1.5)
        rho0 = fk.coherent_density(1.5, 30)
        h = 1e-3
        ts = np.array([0.5 - h, 0.5, 0.5 + h])
        outs = fk.evolve_direct(rho0, ts, p, tol=1e-12)
        for n in (2, 3, 4):
            xs = [fk.quadrature_moment_fock(o, an.QuadratureSpec(n, 0.0)) for o in outs]
            lhs = (xs[2] - xs[0]) / (2 * h)
            if n >= 2:
                low = fk.quadrature_moment_fock(outs[1], an.QuadratureSpec(n - 2, 0.0)) \
                    if n > 2 else 1.0
            rhs = -0.5 * n * g * xs[1] + g * n * (n - 1) / 4.0 * low
            assert abs(lhs - rhs) < 1e-6 * max(1.0, abs(rhs))

    def test_rejects_bad_tolerance(self, coherent40, damped_params):
        with pytest.raises(ValueError):
            fk.evolve_direct(coherent40, 0.1, damped_params, tol=0.0)


class TestExpectation:
    def test_vacuum(self):
        rho = fk.coherent_density(0.0, 10)
        assert fk.expectation(rho, an.OrderedMonomial(0, 1)) == 0.0

    def test_coherent_number(self, coherent40):
        got = fk.expectation(coherent40, an.OrderedMonomial(1, 1))
        assert abs(got - 4.0) < 1e-10

    def test_cat_aligned_value(self):
        alpha0 = 3.0
        rho = fk.density_from_vector(fk.kerr_evolved_vector(alpha0, 60, math.pi))
        got = fk.expectation(rho, an.OrderedMonomial(6, 0))
        want = an.kitten_expectation_value(6, 0, 1, 2, alpha0)
        assert abs(got - want) < 10 * math.exp(-2 * alpha0**2) * alpha0**6

    def test_rejects_power_beyond_truncation(self):
        rho = fk.coherent_density(1.0, 5)
        with pytest.raises(ValueError):
            fk.expectation(rho, an.OrderedMonomial(6, 0))


class TestQuadratureMomentFock:
    def test_vacuum_variance(self):
        rho = fk.coherent_density(0.0, 12)
        for theta in (0.0, 1.2):
            got = fk.quadrature_moment_fock(rho, an.QuadratureSpec(2, theta))
            assert got == pytest.approx(0.5, abs=1e-12)

    def test_coherent_mean(self, coherent40):
        got = fk.quadrature_moment_fock(coherent40, an.QuadratureSpec(1, 0.0))
        assert got == pytest.approx(2 * math.sqrt(2.0), rel=1e-12)

    def test_rejects_high_order(self, coherent40):
        with pytest.raises(ValueError):
            fk.quadrature_moment_fock(coherent40, an.QuadratureSpec(13, 0.0))


class TestStructuralInvariants:
    def test_stripe_independence(self, damped_params):
        """Evolving stripes in isolation and summing equals evolving whole."""
        rho0 = fk.coherent_density(2.0, 25)
        t = 0.8
        full = fk.evolve_analytic(rho0, t, damped_params)
        total = np.zeros_like(full.rho)
        for m in range(26):
            mask = np.zeros_like(rho0.rho)
            i = np.arange(26 - m)
            mask[25 - i, 25 - m - i] = 1.0
            if m > 0:
                mask += mask.T
            part = fk.FockDensity(n_trunc=25, rho=rho0.rho * mask)
            total += fk.evolve_analytic(part, t, damped_params).rho
        assert np.max(np.abs(total - full.rho)) < 1e-10

    @pytest.mark.parametrize("gamma", [0.0, 0.01])
    def test_recurrence_inheritance(self, gamma):
        """Open-system peaks of |<adag^2>| sit at the closed-system times."""
        p = ModelParams(kappa=1.0, gamma=gamma, alpha0=2.0)
        rho0 = fk.coherent_density(2.0, 40)
        prop = fk.AnalyticPropagator(rho0, p)
        ts = np.linspace(2.0, 4.5, 401)  # window around T(2,0) = pi
        vals = np.array([abs(fk.expectation(prop.rho(t), an.OrderedMonomial(2, 0)))
                         for t in ts])
        peak = ts[np.argmax(vals)]
        assert abs(peak - math.pi) <= (ts[1] - ts[0]) + 1e-12

    def test_ordering_independent_peak(self):
        p = ModelParams(kappa=1.0, gamma=0.01, alpha0=2.0)
        rho0 = fk.coherent_density(2.0, 40)
        prop = fk.AnalyticPropagator(rho0, p)
        ts = np.linspace(2.5, 3.8, 301)
        normal = []
        symmetric = []
        for t in ts:
            rho = prop.rho(t)
            normal.append(abs(fk.expectation(rho, an.OrderedMonomial(2, 0))))
            symmetric.append(abs(fk.expectation(rho, an.OrderedMonomial(2, 0, "symmetric"))))
        assert abs(ts[np.argmax(normal)] - ts[np.argmax(symmetric)]) <= ts[1] - ts[0] + 1e-12

    def test_positivity_along_evolution(self, coherent40, damped_params):
        prop = fk.AnalyticPropagator(coherent40, damped_params)
        for t in (0.2, 1.0, math.pi):
            rho = prop.rho(t)
            assert np.min(np.linalg.eigvalsh(rho.rho)) > -1e-8

    def test_validate_flags_truncation(self):
        v = fk.coherent_vector(2.0, 12)  # far too small a basis
        v = v / np.linalg.norm(v)
        rho = fk.density_from_vector(v)
        with pytest.raises(ValueError, match="truncation|population"):
            rho.validate()

    def test_validate_passes_for_adequate_basis(self, coherent40):
        coherent40.validate()
