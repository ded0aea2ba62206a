import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import assume, given, settings

from conftest import parameter_sets
from epidiff.equilibria import (
    CubicCoefficients,
    analyze,
    classify,
    cleared_quartic,
    cubic_coefficients,
    default_lambda_max,
    equilibrium_from_lambda,
    find_endemic_equilibria,
    fixed_point_residual,
)
from epidiff.errors import CoefficientRecoveryError, InfeasibleEquilibriumError
from epidiff.model import (
    beta_critical,
    control_reproduction_number,
    derive_rates,
    disease_free_equilibrium,
    rhs,
)
from epidiff.presets import CAMEROON, GERMANY


def sympy_cubic(p):
    """Independent symbolic elimination of the equilibrium system.

    Solves the S, V equations and the E-R coupling symbolically, substitutes
    into lam*N = beta*(A + eta*I) with N = (Lambda - delta*I)/mu, clears
    denominators and returns the cubic cofactor of lam (highest power first).
    """
    lam = sp.Symbol("lam")
    q = {k: sp.nsimplify(v, rational=True) for k, v in p.to_dict().items()}
    L, mu, beta, eta = q["lambda_rec"], q["mu"], q["beta"], q["eta"]
    phi1, phi2, c1, c2, r1 = q["phi1"], q["phi2"], q["c1"], q["c2"], q["r1"]
    pp, a1, g, s, th, d = q["p"], q["a1"], q["gamma"], q["sigma"], q["theta"], q["delta"]
    S, V, E, A, I, R = sp.symbols("S V E A I R")
    eqs = [
        r1 * L + c2 * V - (c1 + mu) * S - lam * S,
        (1 - r1) * L + c1 * S - (mu + c2) * V - phi1 * lam * V,
        lam * (S + phi1 * V + phi2 * R) - (mu + g) * E,
        pp * g * E - (mu + s) * A,
        (1 - pp) * g * E + (1 - a1) * s * A - (mu + d + th) * I,
        a1 * s * A + th * I - mu * R - phi2 * lam * R,
    ]
    sol = sp.solve(eqs, [S, V, E, A, I, R], dict=True)[0]
    n = (L - d * sol[I]) / mu
    expr = sp.together(lam * n - beta * (sol[A] + eta * sol[I]))
    num = sp.factor(sp.numer(expr))
    poly = sp.Poly(sp.cancel(num / lam), lam)
    coeffs = [float(c) for c in poly.all_coeffs()]
    return coeffs


class TestEquilibriumFromLambda:
    def test_zero_is_dfe(self):
        eq = equilibrium_from_lambda(GERMANY, 0.0)
        dfe = disease_free_equilibrium(GERMANY)
        np.testing.assert_allclose(eq.state.as_array(), dfe.as_array(), rtol=1e-12, atol=1e-9)

    def test_negative_lambda(self):
        with pytest.raises(InfeasibleEquilibriumError):
            equilibrium_from_lambda(GERMANY, -1.0)

    @pytest.mark.parametrize("p", [GERMANY, CAMEROON], ids=["germany", "cameroon"])
    def test_roots_have_small_residual(self, p):
        roots = find_endemic_equilibria(p)
        assert roots
        for eq in roots:
            res = np.max(np.abs(rhs(p, p.beta, eq.state)))
            assert res < 1e-8 * p.lambda_rec
            assert eq.residual == pytest.approx(res)
            assert eq.n_star == pytest.approx(eq.state.n, rel=1e-12)

    def test_chain_relations(self):
        eq = find_endemic_equilibria(GERMANY)[0]
        p, k = GERMANY, derive_rates(GERMANY)
        st = eq.state
        assert st.a == pytest.approx(p.p * p.gamma * st.e / k.k4, rel=1e-12)
        assert st.i == pytest.approx((p.q * p.gamma * st.e + p.a2 * p.sigma * st.a) / k.k5, rel=1e-12)

    def test_lambda_consistency(self):
        eq = find_endemic_equilibria(GERMANY)[0]
        st = eq.state
        lam = GERMANY.beta * (st.a + GERMANY.eta * st.i) / st.n
        assert lam == pytest.approx(eq.lambda_star, rel=1e-8)


class TestResidual:
    def test_zero(self):
        assert fixed_point_residual(GERMANY, 0.0) == 0.0

    def test_no_transmission(self):
        p = GERMANY.replace(beta=0.0)
        for lam in (1e-6, 0.1, 0.9):
            assert fixed_point_residual(p, lam) == pytest.approx(lam)

    def test_sign_scan_finds_bracket(self):
        grid = np.geomspace(1e-12 * GERMANY.beta, GERMANY.beta, 10_000)
        values = np.array([fixed_point_residual(GERMANY, float(x)) for x in grid])
        assert np.any(np.sign(values[:-1]) != np.sign(values[1:]))


class TestFinder:
    def test_germany_one_root(self):
        roots = find_endemic_equilibria(GERMANY)
        assert len(roots) == 1
        assert roots[0].lambda_star > 0

    def test_subcritical_none(self):
        p = GERMANY.replace(beta=0.5 * beta_critical(GERMANY))
        assert control_reproduction_number(p) == pytest.approx(0.5)
        assert find_endemic_equilibria(p) == []

    def test_zero_beta(self):
        assert find_endemic_equilibria(GERMANY.replace(beta=0.0)) == []

    @pytest.mark.parametrize("p", [GERMANY, CAMEROON], ids=["germany", "cameroon"])
    def test_refinement_invariance(self, p):
        coarse = [e.lambda_star for e in find_endemic_equilibria(p, n_scan=2_000)]
        fine = [e.lambda_star for e in find_endemic_equilibria(p, n_scan=20_000)]
        assert len(coarse) == len(fine)
        np.testing.assert_allclose(coarse, fine, rtol=1e-10)

    def test_matches_sympy_roots(self):
        roots = np.roots(sympy_cubic(GERMANY))
        positive = sorted(r.real for r in roots if abs(r.imag) < 1e-12 and r.real > 0)
        found = [e.lambda_star for e in find_endemic_equilibria(GERMANY)]
        np.testing.assert_allclose(found, positive, rtol=1e-8)

    def test_lambda_max_bound(self):
        assert default_lambda_max(GERMANY) == pytest.approx(GERMANY.beta * (1 + GERMANY.eta))

    def test_n_scan_minimum(self):
        with pytest.raises(ValueError):
            find_endemic_equilibria(GERMANY, n_scan=10)

    def test_diagnostics(self):
        diag = {}
        find_endemic_equilibria(GERMANY, diagnostics=diag)
        assert diag["infeasible"] == []


class TestCubic:
    def test_quartic_vanishes_at_zero(self):
        assert cleared_quartic(GERMANY, 0.0) == 0.0

    def test_germany_signs(self):
        c = cubic_coefficients(GERMANY)
        assert c.a3 < 0
        assert c.a0 > 0
        assert c.a3 == c.a3_closed_form

    def test_at_threshold(self):
        p = GERMANY.replace(beta=beta_critical(GERMANY))
        c = cubic_coefficients(p)
        scale = max(abs(v) * default_lambda_max(p) ** k for k, v in zip((3, 2, 1, 0), c.as_tuple()))
        assert abs(c.a0) <= 1e-10 * scale

    @pytest.mark.parametrize("p", [GERMANY, CAMEROON], ids=["germany", "cameroon"])
    def test_matches_symbolic_elimination(self, p):
        ref = np.array(sympy_cubic(p))
        got = np.array(cubic_coefficients(p).as_tuple())
        ratio = got / ref
        np.testing.assert_allclose(ratio, ratio[0], rtol=1e-6)

    def test_strict_raises_on_mismatch(self):
        c = cubic_coefficients(GERMANY)
        if c.closed_form_consistent:
            pytest.skip("closed forms agree for this parameter set")
        with pytest.raises(CoefficientRecoveryError):
            cubic_coefficients(GERMANY, strict=True)

    @settings(max_examples=80)
    @given(parameter_sets())
    def test_a0_sign_tracks_rc(self, p):
        rc = control_reproduction_number(p)
        assume(abs(rc - 1) > 1e-6)
        a0 = cubic_coefficients(p).a0
        assert math.copysign(1, a0) == math.copysign(1, rc - 1)

    @settings(max_examples=80)
    @given(parameter_sets())
    def test_a3_negative(self, p):
        assume(p.theta > p.delta and p.phi1 > 1e-6 and p.phi2 > 1e-6)
        assert cubic_coefficients(p).a3 < 0


def _coeffs(signs):
    a3, a2, a1, a0 = signs
    return CubicCoefficients(a3, a2, a1, a0, a3, a0, True)


class TestClassify:
    def test_case_i(self):
        r = classify(_coeffs((-1, -1, -1, 1)), 1.2, found=1)
        assert (r.case_label, r.descartes_bound, r.consistent) == ("i", 1, True)

    def test_case_ii(self):
        r = classify(_coeffs((-1, 1, -1, 1)), 1.2)
        assert r.case_label == "ii"
        assert r.descartes_bound == 3

    def test_case_iii(self):
        r = classify(_coeffs((-1, 1, 1, -1)), 0.8, found=2)
        assert r.case_label == "iii"
        assert r.consistent

    def test_case_iv(self):
        r = classify(_coeffs((-1, -1, -1, -1)), 0.5, found=0)
        assert (r.case_label, r.descartes_bound) == ("iv", 0)

    def test_inconsistent_flagged(self):
        r = classify(_coeffs((-1, -1, -1, -1)), 0.5, found=1)
        assert not r.consistent


class TestAnalyze:
    def test_germany_report(self):
        report = analyze(GERMANY)
        d = report.to_dict()
        assert set(d) >= {"rc", "beta_crit", "case_label", "roots"}
        assert d["case_label"] == "i"
        assert report.root_count == 1
        assert report.consistent
        assert set(d["roots"][0]) == {"lambda_star", "S", "V", "E", "A", "I", "R", "N", "residual"}

    def test_subcritical_report(self):
        report = analyze(GERMANY.replace(beta=0.5 * beta_critical(GERMANY)))
        assert report.case_label == "iv"
        assert report.root_count == 0
