"""Endemic equilibria of the SVEAIR ODE.

An equilibrium is parametrized by its force of infection ``lam``: given
``lam``, every compartment follows by back-substitution. Endemic equilibria
are the positive roots of the scalar fixed-point residual
``lam - beta*(A*(lam) + eta*I*(lam)) / N*(lam)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CoefficientRecoveryError, DegenerateParametersError, InfeasibleEquilibriumError
from .model import (
    CompartmentState,
    Parameters,
    beta_critical,
    control_reproduction_number,
    derive_rates,
    rhs,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EndemicEquilibrium:
    lambda_star: float
    state: CompartmentState
    n_star: float
    residual: float

    def to_dict(self) -> dict:
        return {
            "lambda_star": self.lambda_star,
            **self.state.to_dict(),
            "N": self.n_star,
            "residual": self.residual,
        }


@dataclass(frozen=True)
class CubicCoefficients:
    """Coefficients of ``a3*x^3 + a2c*x^2 + a1c*x + a0``.

    Scaled so that ``|a3|`` equals the closed-form leading coefficient's
    magnitude (the two coincide whenever the recovered sign is negative).
    ``a0_closed_form`` is the closed-form trailing coefficient, kept for
    comparison with the recovered ``a0``.
    """

    a3: float
    a2c: float
    a1c: float
    a0: float
    a3_closed_form: float
    a0_closed_form: float
    closed_form_consistent: bool

    def as_tuple(self) -> tuple[float, float, float, float]:
        return self.a3, self.a2c, self.a1c, self.a0


@dataclass
class EquilibriumReport:
    rc: float
    case_label: str
    descartes_bound: int
    roots: list = field(default_factory=list)
    consistent: bool = True
    beta_crit: float | None = None
    coefficients: CubicCoefficients | None = None

    def to_dict(self) -> dict:
        return {
            "rc": self.rc,
            "beta_crit": self.beta_crit,
            "case_label": self.case_label,
            "descartes_bound": self.descartes_bound,
            "consistent": self.consistent,
            "roots": [r.to_dict() for r in self.roots],
        }

    @property
    def root_count(self) -> int:
        return len(self.roots)


class _Chain:
    """Per-unit-E coefficients shared by all back-substitution formulas."""

    def __init__(self, p: Parameters):
        k = derive_rates(p)
        self.p = p
        self.k = k
        self.a_per_e = p.p * p.gamma / k.k4
        self.i_per_e = (p.q * p.gamma + p.a2 * p.sigma * self.a_per_e) / k.k5
        # R* = r_flux * E / (mu + phi2*lam)
        self.r_flux = p.a1 * p.sigma * self.a_per_e + p.theta * self.i_per_e
        self.infectivity = self.a_per_e + p.eta * self.i_per_e


def _susceptibles(p: Parameters, k, lam: float) -> tuple[float, float]:
    det = (k.k1 + lam) * (k.k2 + p.phi1 * lam) - p.c1 * p.c2
    s = (p.r1 * p.lambda_rec * p.phi1 * lam + k.k7 * p.lambda_rec) / det
    v = (p.r2 * p.lambda_rec + p.c1 * s) / (k.k2 + p.phi1 * lam)
    return s, v


def _exposed(chain: _Chain, lam: float, s: float, v: float) -> float:
    p = chain.p
    # E*(k3 - lam*phi2*r_flux/(mu + phi2*lam)) = lam*(S* + phi1*V*)
    denom = chain.k.k3 - lam * p.phi2 * chain.r_flux / (p.mu + p.phi2 * lam)
    if denom <= 0:
        raise InfeasibleEquilibriumError(f"no nonnegative E* at lambda={lam!r}")
    return lam * (s + p.phi1 * v) / denom


def equilibrium_from_lambda(p: Parameters, lambda_star: float) -> EndemicEquilibrium:
    """Back-substitute S*, V*, E*, A*, I*, R*, N* from the force of infection."""
    if lambda_star < 0:
        raise InfeasibleEquilibriumError("lambda_star must be nonnegative")
    chain = _Chain(p)
    s, v = _susceptibles(p, chain.k, lambda_star)
    e = _exposed(chain, lambda_star, s, v)
    a = chain.a_per_e * e
    i = chain.i_per_e * e
    r = chain.r_flux * e / (p.mu + p.phi2 * lambda_star)
    n_star = (p.lambda_rec - p.delta * i) / p.mu
    if n_star <= 0 or min(s, v, e, a, i, r) < 0:
        raise InfeasibleEquilibriumError(f"infeasible equilibrium at lambda={lambda_star!r}")
    state = CompartmentState(s, v, e, a, i, r)
    residual = float(np.max(np.abs(rhs(p, p.beta, state))))
    return EndemicEquilibrium(float(lambda_star), state, n_star, residual)


def fixed_point_residual(p: Parameters, lam: float) -> float:
    eq = equilibrium_from_lambda(p, lam)
    st = eq.state
    return lam - p.beta * (st.a + p.eta * st.i) / eq.n_star


def default_lambda_max(p: Parameters) -> float:
    # lambda = beta*(A + eta*I)/N <= beta*(1 + eta)
    return p.beta * (1.0 + p.eta)


def _bisect(f, lo: float, hi: float, f_lo: float, rel_tol: float = 1e-14) -> float:
    while hi - lo > rel_tol * max(abs(hi), abs(lo)):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = f(mid)
        if f_mid == 0.0:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def find_endemic_equilibria(
    p: Parameters,
    lam_max: float | None = None,
    n_scan: int = 10_000,
    diagnostics: dict | None = None,
    n_near_zero: int = 200,
) -> list[EndemicEquilibrium]:
    """Locate all endemic equilibria with force of infection in (0, lam_max].

    Sign changes of the fixed-point residual on a uniform grid are refined by
    bisection. The uniform grid is preceded by ``n_near_zero`` log-spaced
    points below its first node, since realistic roots can be orders of
    magnitude smaller than the grid spacing. Grid points where the back-substitution is infeasible are
    skipped and listed in ``diagnostics["infeasible"]`` when a dict is given.
    """
    if lam_max is None:
        lam_max = default_lambda_max(p)
    if n_scan < 1000:
        raise ValueError("n_scan must be at least 1000")
    if p.beta == 0 or lam_max <= 0:
        return []

    uniform = np.linspace(0.0, lam_max, n_scan + 1)[1:]
    near_zero = np.geomspace(1e-12 * lam_max, uniform[0], n_near_zero, endpoint=False)
    grid = np.concatenate([near_zero, uniform])
    values = np.full(grid.shape, np.nan)
    infeasible = []
    for j, lam in enumerate(grid):
        try:
            values[j] = fixed_point_residual(p, float(lam))
        except InfeasibleEquilibriumError:
            infeasible.append(float(lam))
    if diagnostics is not None:
        diagnostics["infeasible"] = infeasible

    f = lambda x: fixed_point_residual(p, x)
    roots: list[float] = []
    for j in range(len(grid) - 1):
        f0, f1 = values[j], values[j + 1]
        if np.isnan(f0) or np.isnan(f1):
            continue
        if f0 == 0.0:
            roots.append(float(grid[j]))
        elif (f0 > 0) != (f1 > 0) and f1 != 0.0:
            roots.append(_bisect(f, float(grid[j]), float(grid[j + 1]), float(f0)))
    if len(grid) and values[-1] == 0.0:
        roots.append(float(grid[-1]))

    roots.sort()
    unique: list[float] = []
    for r in roots:
        if not unique or r - unique[-1] > 1e-10 * lam_max:
            unique.append(r)
    return [equilibrium_from_lambda(p, r) for r in unique]


def _closed_form_coefficients(p: Parameters) -> tuple[float, float]:
    k = derive_rates(p)
    rc = control_reproduction_number(p)
    vacc = p.r1 * p.mu * (1 - p.phi1) + p.phi1 * (p.mu + p.c1) + p.c2
    infect = p.a2 * p.eta * p.p * p.sigma + k.k4 * p.eta * p.q + k.k5 * p.p
    a3 = -p.phi1 * p.phi2 * vacc * infect * (
        (p.theta - p.delta) * (p.a2 * p.p * p.sigma * p.gamma + k.k4 * p.q * p.gamma)
        + k.k5 * p.mu * (p.mu + k.k2)
        + k.k5 * p.gamma * p.sigma * (1 - p.a1 * p.p)
    )
    a0 = k.k3 * k.k4 * k.k5 * p.mu**2 * (p.mu + p.c2 + p.c1) * vacc * infect * (rc - 1.0)
    return a3, a0


def _cleared_cubic(p: Parameters, lam: float) -> float:
    chain = _Chain(p)
    k = chain.k
    # (k1 + lam)(k2 + phi1*lam) - c1*c2 expanded around k6 to avoid cancellation
    det = k.k6 + lam * (p.phi1 * k.k1 + k.k2) + p.phi1 * lam * lam
    p1 = (
        p.r1 * p.lambda_rec * (k.k2 + p.phi1 * lam)
        + p.c2 * p.r2 * p.lambda_rec
        + p.phi1 * (p.r2 * p.lambda_rec * (k.k1 + lam) + p.c1 * p.r1 * p.lambda_rec)
    )
    m = p.mu + p.phi2 * lam
    kap = k.k3 * m - p.phi2 * chain.r_flux * lam
    return (
        p.lambda_rec * det * kap
        - p.delta * chain.i_per_e * lam * p1 * m
        - p.beta * chain.infectivity * p.mu * p1 * m
    )


def cleared_quartic(p: Parameters, lam: float) -> float:
    """Numerator of the fixed-point residual after clearing denominators.

    With ``det`` the 2x2 susceptible determinant, ``m = mu + phi2*lam`` and
    ``kap = k3*m - phi2*r_flux*lam``, the residual is ``lam * Q(lam) / (...)``
    where ``Q = Lambda*det*kap - delta*iE*lam*P1*m - beta*inf*mu*P1*m``
    and ``P1 = det*(S* + phi1*V*)``. Returns ``lam * Q(lam)``.
    """
    return lam * _cleared_cubic(p, lam)


def cubic_coefficients(p: Parameters, strict: bool = False, rel_tol: float = 1e-6) -> CubicCoefficients:
    """Recover the cubic factor ``Q`` of the equilibrium quartic.

    The trailing coefficient is ``Q(0)``, evaluated directly. The other
    three come from an exact fit of ``(Q(lam) - Q(0)) / lam`` at three
    sample points. The result is negated (so the leading coefficient is
    negative and the trailing one has the sign of ``R_c - 1``) and scaled by
    a positive factor so that ``|a3|`` equals the closed-form leading
    coefficient's magnitude. The closed-form trailing coefficient is
    compared with the recovered one; a mismatch beyond ``rel_tol`` sets
    ``closed_form_consistent=False`` and raises when ``strict``.
    """
    chain = _Chain(p)
    # sample on the natural scale of lambda to keep the system well conditioned
    scale = max(p.beta * (1 + p.eta), chain.k.k3, p.mu, 1e-12)
    q0 = _cleared_cubic(p, 0.0)
    xs = scale * np.array([-1.0, 1.0, 2.0])
    gs = np.array([(_cleared_cubic(p, float(x)) - q0) / x for x in xs])
    # work in the scaled variable u = lam/scale, then undo the scaling
    coeffs_u = np.linalg.solve(np.vander(xs / scale, 3), gs)
    upper = coeffs_u / scale ** np.arange(2, -1, -1, dtype=float)
    cubic = -np.append(upper, q0)

    a3_cf, a0_cf = _closed_form_coefficients(p)
    if cubic[0] != 0 and a3_cf != 0:
        # positive factor: never let a noisy leading term flip the signs
        cubic = cubic * abs(a3_cf / cubic[0])
    consistent = math.isclose(cubic[3], a0_cf, rel_tol=rel_tol, abs_tol=0.0) or (
        a0_cf == 0 and abs(cubic[3]) <= rel_tol * abs(cubic[0])
    )
    if strict and not consistent:
        raise CoefficientRecoveryError(
            f"recovered trailing coefficient {cubic[3]!r} does not match closed form {a0_cf!r}"
        )
    return CubicCoefficients(*map(float, cubic), float(a3_cf), float(a0_cf), bool(consistent))


def _sign_changes(values) -> int:
    signs = [v > 0 for v in values if v != 0]
    return sum(1 for x, y in zip(signs, signs[1:]) if x != y)


def classify(coeffs: CubicCoefficients, rc: float, found: int | None = None) -> EquilibriumReport:
    """Descartes-rule case label (i)-(iv) from the coefficient sign pattern.

    ``found`` is the number of roots located numerically; a disagreement
    with the Descartes bound is logged and flagged on the report.
    """
    a3, a2, a1, a0 = coeffs.as_tuple()
    bound = _sign_changes([a3, a2, a1, a0])
    if rc > 1:
        label = "ii" if (a2 > 0 and a1 < 0) else "i"
    elif rc < 1 and bound >= 2:
        label = "iii"
    else:
        label = "iv"
    report = EquilibriumReport(rc=rc, case_label=label, descartes_bound=bound)
    if found is not None:
        # Descartes gives the count modulo 2 below the bound
        report.consistent = found <= bound and (bound - found) % 2 == 0
        if not report.consistent:
            log.warning("located %d roots but Descartes bound is %d (case %s)", found, bound, label)
    return report


def analyze(p: Parameters, n_scan: int = 10_000, lam_max: float | None = None) -> EquilibriumReport:
    """Full equilibrium analysis used by the CLI report."""
    rc = control_reproduction_number(p)
    roots = find_endemic_equilibria(p, lam_max=lam_max, n_scan=n_scan)
    coeffs = cubic_coefficients(p)
    report = classify(coeffs, rc, found=len(roots))
    report.roots = roots
    report.coefficients = coeffs
    try:
        report.beta_crit = beta_critical(p)
    except DegenerateParametersError:
        report.beta_crit = None
    return report
