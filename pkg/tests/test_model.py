import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from conftest import parameter_sets
from epidiff.errors import DegenerateParametersError, ModelError, ZeroPopulationError
from epidiff.model import (
    BetaSchedule,
    CompartmentState,
    Parameters,
    beta_critical,
    control_reproduction_number,
    derive_rates,
    disease_free_equilibrium,
    force_of_infection,
    gas_condition,
    instantaneous_rc,
    level_crossings,
    next_generation_matrices,
    rhs,
)
from epidiff.presets import GERMANY, GERMANY_INITIAL, GERMANY_MU

ZERO = Parameters(*([0.0] * 15))


def direct_rhs(p: Parameters, x):
    """Term-by-term transcription of the six equations, no shared helpers."""
    S, V, E, A, I, R = x
    N = S + V + E + A + I + R
    lam = p.beta * (A + p.eta * I) / N
    dS = p.r1 * p.lambda_rec + p.c2 * V - (p.c1 + p.mu) * S - lam * S
    dV = (1 - p.r1) * p.lambda_rec + p.c1 * S - (p.mu + p.c2) * V - p.phi1 * lam * V
    dE = lam * S + p.phi1 * lam * V + p.phi2 * lam * R - (p.mu + p.gamma) * E
    dA = p.p * p.gamma * E - (p.mu + p.sigma) * A
    dI = (1 - p.p) * p.gamma * E + (1 - p.a1) * p.sigma * A - (p.mu + p.delta + p.theta) * I
    dR = p.a1 * p.sigma * A + p.theta * I - p.mu * R - p.phi2 * lam * R
    return np.array([dS, dV, dE, dA, dI, dR])


class TestParameters:
    def test_derived_fractions(self):
        assert GERMANY.r2 == pytest.approx(1 - 0.02534)
        assert GERMANY.q == pytest.approx(0.8)
        assert GERMANY.a2 == pytest.approx(1 - 0.34949)

    @pytest.mark.parametrize("field,value", [("eta", 1.5), ("mu", -1.0), ("beta", math.nan), ("r1", 2.0)])
    def test_invalid_rejected(self, field, value):
        with pytest.raises(ModelError):
            GERMANY.replace(**{field: value})

    def test_negative_compartment_rejected(self):
        with pytest.raises(ModelError):
            CompartmentState(1.0, -1.0, 0, 0, 0, 0)


class TestDerivedRates:
    def test_germany_k1(self):
        assert derive_rates(GERMANY).k1 == 0.77 + 1 / (81.72 * 365)

    def test_all_zero(self):
        k = derive_rates(ZERO)
        assert (k.k1, k.k2, k.k3, k.k4, k.k5, k.k6, k.k7) == (0, 0, 0, 0, 0, 0, 0)

    def test_k6_identity(self):
        p = ZERO.replace(mu=1.0, c1=2.0, c2=3.0)
        assert derive_rates(p).k6 == 6.0

    @given(parameter_sets())
    def test_k6_positive(self, p):
        k = derive_rates(p)
        assert k.k6 == pytest.approx(p.mu**2 + (p.c1 + p.c2) * p.mu, rel=1e-12)
        assert k.k6 > 0


class TestForceOfInfection:
    def test_no_infectious(self):
        assert force_of_infection(GERMANY, 0.9, CompartmentState(10, 5, 3, 0, 0, 1)) == 0.0

    def test_arithmetic(self):
        p = GERMANY.replace(eta=0.5)
        st_ = CompartmentState(40, 20, 10, 10, 20, 0)
        assert force_of_infection(p, 1.0, st_) == pytest.approx(0.2)

    def test_fully_infectious(self):
        p = GERMANY.replace(eta=1.0)
        assert force_of_infection(p, 0.7, CompartmentState(0, 0, 0, 30, 70, 0)) == pytest.approx(0.7)

    def test_zero_population(self):
        with pytest.raises(ZeroPopulationError):
            force_of_infection(GERMANY, 1.0, CompartmentState(0, 0, 0, 0, 0, 0))


class TestRhs:
    def test_dfe_is_stationary(self):
        d = rhs(GERMANY, GERMANY.beta, disease_free_equilibrium(GERMANY))
        assert np.max(np.abs(d)) < 1e-9 * GERMANY.lambda_rec

    def test_matches_direct_transcription(self):
        x = GERMANY_INITIAL.as_array()
        np.testing.assert_allclose(rhs(GERMANY, GERMANY.beta, x), direct_rhs(GERMANY, x), rtol=1e-12, atol=1e-9)

    @given(parameter_sets(), st.lists(st.floats(0.0, 1e7), min_size=6, max_size=6).filter(lambda v: sum(v) > 1))
    def test_sum_identity(self, p, x):
        x = np.array(x)
        d = rhs(p, p.beta, x)
        expected = p.lambda_rec - p.mu * x.sum() - p.delta * x[4]
        scale = p.lambda_rec + p.mu * x.sum() + p.delta * x[4] + np.abs(d).sum()
        assert abs(d.sum() - expected) <= 1e-12 * scale

    def test_zero_population(self):
        with pytest.raises(ZeroPopulationError):
            rhs(GERMANY, 1.0, np.zeros(6))


class TestDiseaseFreeEquilibrium:
    @given(parameter_sets())
    def test_total(self, p):
        dfe = disease_free_equilibrium(p)
        assert dfe.s + dfe.v == pytest.approx(p.lambda_rec / p.mu, rel=1e-12)

    @given(parameter_sets())
    def test_zeroes_rhs(self, p):
        d = rhs(p, p.beta, disease_free_equilibrium(p))
        assert np.max(np.abs(d)) <= 1e-9 * p.lambda_rec

    def test_no_vaccination(self):
        p = GERMANY.replace(c1=0.0, r1=1.0)
        dfe = disease_free_equilibrium(p)
        assert dfe.v == 0.0
        assert dfe.s == pytest.approx(p.lambda_rec / p.mu, rel=1e-14)

    def test_degenerate(self):
        with pytest.raises(DegenerateParametersError):
            disease_free_equilibrium(GERMANY.replace(mu=0.0))

    def test_long_integration_oracle(self):
        p = GERMANY

        def sv(t, y):
            s, v = y
            return [p.r1 * p.lambda_rec + p.c2 * v - (p.c1 + p.mu) * s,
                    p.r2 * p.lambda_rec + p.c1 * s - (p.mu + p.c2) * v]

        sol = solve_ivp(sv, (0, 1e6), [GERMANY_INITIAL.s, GERMANY_INITIAL.v], method="LSODA", rtol=1e-11, atol=1e-6)
        dfe = disease_free_equilibrium(p)
        np.testing.assert_allclose(sol.y[:, -1], [dfe.s, dfe.v], rtol=1e-7)


class TestReproductionNumber:
    def test_zero_beta(self):
        assert control_reproduction_number(GERMANY.replace(beta=0.0)) == 0.0

    def test_germany_magnitude(self):
        # table values reproduce the reported value to about 1e-5 (see acceptance)
        assert control_reproduction_number(GERMANY) == pytest.approx(1.127472860225384, rel=2e-5)

    def test_degenerate(self):
        with pytest.raises(DegenerateParametersError):
            control_reproduction_number(GERMANY.replace(mu=0.0, gamma=0.0))

    @given(parameter_sets(), st.floats(0.01, 100.0))
    def test_homogeneous_in_beta(self, p, c):
        scaled = control_reproduction_number(p.replace(beta=c * p.beta))
        assert scaled == pytest.approx(c * control_reproduction_number(p), rel=1e-12)

    @given(parameter_sets())
    def test_beta_critical_gives_one(self, p):
        if control_reproduction_number(p) == 0:
            return
        assert control_reproduction_number(p.replace(beta=beta_critical(p))) == pytest.approx(1.0, rel=1e-12)

    def test_beta_critical_degenerate(self):
        with pytest.raises(DegenerateParametersError):
            beta_critical(GERMANY.replace(gamma=0.0))

    @pytest.mark.parametrize("beta,expected", [(0.85445, 1.04228), (0.81946, 0.99960)])
    def test_checkpoints(self, beta, expected):
        assert control_reproduction_number(GERMANY.replace(beta=beta)) == pytest.approx(expected, abs=1e-4)


def power_iteration(m, iters=500):
    x = np.ones(m.shape[0])
    lam = 0.0
    for _ in range(iters):
        y = m @ x
        lam = np.linalg.norm(y) / np.linalg.norm(x)
        if lam == 0:
            return 0.0
        x = y / np.linalg.norm(y)
    return lam


class TestNextGeneration:
    def test_spectral_radius(self):
        z, w = next_generation_matrices(GERMANY)
        rho = power_iteration(z @ np.linalg.inv(w))
        assert rho == pytest.approx(control_reproduction_number(GERMANY), rel=1e-10)

    @given(parameter_sets())
    def test_spectral_radius_random(self, p):
        z, w = next_generation_matrices(p)
        rho = max(abs(np.linalg.eigvals(z @ np.linalg.inv(w))))
        assert rho == pytest.approx(control_reproduction_number(p), rel=1e-9, abs=1e-15)

    def test_zero_beta(self):
        z, _ = next_generation_matrices(GERMANY.replace(beta=0.0))
        assert not z.any()

    @given(st.floats(0.01, 5), st.floats(0.01, 5), st.floats(0.01, 5), st.floats(0, 1), st.floats(0, 1), st.floats(0.01, 1))
    def test_w_inverse_closed_form(self, gamma, sigma, theta, pf, a1, mu):
        p = GERMANY.replace(gamma=gamma, sigma=sigma, theta=theta, p=pf, a1=a1, mu=mu)
        k = derive_rates(p)
        _, w = next_generation_matrices(p)
        expected = np.array([
            [1 / k.k3, 0, 0],
            [p.p * gamma / (k.k3 * k.k4), 1 / k.k4, 0],
            [(p.a2 * p.p * sigma * gamma + k.k4 * p.q * gamma) / (k.k3 * k.k4 * k.k5), p.a2 * sigma / (k.k4 * k.k5), 1 / k.k5],
        ])
        np.testing.assert_allclose(np.linalg.inv(w), expected, rtol=1e-10, atol=1e-14)


class TestGasCondition:
    def test_holds_at_dfe(self):
        assert gas_condition(GERMANY, disease_free_equilibrium(GERMANY).as_array() * (1 + 1e-12))

    def test_fails_for_all_susceptible(self):
        # all-susceptible population exceeds the DFE susceptible share when phi1 < 1
        assert not gas_condition(GERMANY, CompartmentState(1e6, 0, 0, 0, 0, 0))

    @given(parameter_sets())
    def test_share_at_most_one(self, p):
        dfe = disease_free_equilibrium(p)
        assert dfe.s + p.phi1 * dfe.v <= (p.lambda_rec / p.mu) * (1 + 1e-12)


class TestBetaSchedule:
    def test_evaluate(self):
        sched = BetaSchedule(1.0, 0.5, 0.0, 12.0)
        assert sched(0.0) == pytest.approx(1.5)
        assert sched(6.0) == pytest.approx(0.5)

    @pytest.mark.parametrize("alpha", [1.0, -0.1])
    def test_alpha_range(self, alpha):
        with pytest.raises(ModelError):
            BetaSchedule(1.0, alpha)

    @given(st.floats(0.01, 5), st.floats(0, 0.99), st.floats(-10, 10), st.floats(0, 1000))
    def test_positive(self, b0, alpha, b, t):
        assert BetaSchedule(b0, alpha, b)(t) > 0

    def test_instantaneous_rc_linear(self):
        sched = BetaSchedule(GERMANY.beta, 0.1, 0.3)
        t = np.linspace(0, 30, 7)
        expected = [control_reproduction_number(GERMANY.replace(beta=float(sched(s)))) for s in t]
        np.testing.assert_allclose(instantaneous_rc(GERMANY, sched, t), expected, rtol=1e-12)

    def test_level_crossings(self):
        sched = BetaSchedule(1.0, 0.5, 0.0, 12.0)
        roots = level_crossings(sched, 1.0, 0.0, 12.0)
        np.testing.assert_allclose(roots, [3.0, 9.0], atol=1e-9)
        assert len(level_crossings(sched, 2.0, 0.0, 12.0)) == 0


def test_germany_mu():
    assert GERMANY_MU == 1.0 / (81.72 * 365.0)
