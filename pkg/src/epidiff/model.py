"""SVEAIR model algebra: parameters, right-hand side, DFE and R_c.

Compartment order everywhere is (S, V, E, A, I, R).
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import DegenerateParametersError, ModelError, ZeroPopulationError

COMPARTMENTS = ("S", "V", "E", "A", "I", "R")

# fractions that must lie in [0, 1]
_UNIT_FIELDS = ("eta", "phi1", "phi2", "r1", "p", "a1")


@dataclass(frozen=True)
class Parameters:
    """Rates and fractions of the SVEAIR model.

    ``r2 = 1 - r1``, ``q = 1 - p`` and ``a2 = 1 - a1`` are derived properties.
    Vaccine efficacy enters only through ``phi1 = 1 - efficacy``.
    """

    lambda_rec: float
    mu: float
    beta: float
    eta: float
    phi1: float
    phi2: float
    c1: float
    c2: float
    r1: float
    p: float
    a1: float
    gamma: float
    sigma: float
    theta: float
    delta: float

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, (int, float, np.floating, np.integer)) or not math.isfinite(value):
                raise ModelError(f"{f.name} must be a finite number, got {value!r}")
            if value < 0:
                raise ModelError(f"{f.name} must be nonnegative, got {value!r}")
            object.__setattr__(self, f.name, float(value))
        for name in _UNIT_FIELDS:
            if getattr(self, name) > 1:
                raise ModelError(f"{name} must lie in [0, 1], got {getattr(self, name)!r}")

    @property
    def r2(self) -> float:
        return 1.0 - self.r1

    @property
    def q(self) -> float:
        return 1.0 - self.p

    @property
    def a2(self) -> float:
        return 1.0 - self.a1

    def replace(self, **changes) -> Parameters:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


@dataclass(frozen=True)
class DerivedRates:
    k1: float
    k2: float
    k3: float
    k4: float
    k5: float
    k6: float
    k7: float


@dataclass(frozen=True)
class CompartmentState:
    s: float
    v: float
    e: float
    a: float
    i: float
    r: float

    def __post_init__(self):
        for f in fields(self):
            value = float(getattr(self, f.name))
            if not math.isfinite(value) or value < 0:
                raise ModelError(f"compartment {f.name} must be finite and nonnegative, got {value!r}")
            object.__setattr__(self, f.name, value)

    @property
    def n(self) -> float:
        return self.s + self.v + self.e + self.a + self.i + self.r

    def as_array(self) -> np.ndarray:
        return np.array([self.s, self.v, self.e, self.a, self.i, self.r], dtype=float)

    @classmethod
    def from_array(cls, x) -> CompartmentState:
        x = np.asarray(x, dtype=float)
        if x.shape != (6,):
            raise ValueError(f"expected 6 components, got shape {x.shape}")
        return cls(*(float(c) for c in x))

    def to_dict(self) -> dict:
        return dict(zip(COMPARTMENTS, self.as_array().tolist()))


@dataclass(frozen=True)
class BetaSchedule:
    """Seasonal transmission rate ``beta0 * (1 + alpha * cos(2*pi*t/period + b))``."""

    beta0: float
    alpha: float
    b: float = 0.0
    period: float = 12.0

    def __post_init__(self):
        if not self.beta0 > 0:
            raise ModelError("beta0 must be positive")
        if not 0 <= self.alpha < 1:
            raise ModelError("alpha must lie in [0, 1)")
        if not self.period > 0:
            raise ModelError("period must be positive")

    def evaluate(self, t):
        return self.beta0 * (1.0 + self.alpha * np.cos(2.0 * np.pi * np.asarray(t) / self.period + self.b))

    def __call__(self, t):
        return self.evaluate(t)


def derive_rates(p: Parameters) -> DerivedRates:
    k1 = p.c1 + p.mu
    k2 = p.mu + p.c2
    return DerivedRates(
        k1=k1,
        k2=k2,
        k3=p.mu + p.gamma,
        k4=p.mu + p.sigma,
        k5=p.mu + p.delta + p.theta,
        # k1*k2 - c1*c2 expanded: the difference form cancels badly when mu << c1, c2
        k6=p.mu * (p.mu + p.c1 + p.c2),
        k7=p.c2 * p.r2 + p.r1 * k2,
    )


def _as_array(st) -> np.ndarray:
    if isinstance(st, CompartmentState):
        return st.as_array()
    return np.asarray(st, dtype=float)


def force_of_infection(p: Parameters, beta_now: float, st) -> float:
    """``beta_now * (A + eta*I) / N`` for a single state."""
    x = _as_array(st)
    n = x.sum()
    if n <= 0:
        raise ZeroPopulationError("total population must be positive")
    return beta_now * (x[3] + p.eta * x[4]) / n


def rhs_array(p: Parameters, beta_now, x: np.ndarray, recruitment=None) -> np.ndarray:
    """Vectorized right-hand side.

    ``x`` has shape ``(6, ...)``; trailing axes (e.g. grid cells) are
    evaluated independently with a local force of infection.
    ``recruitment`` overrides ``lambda_rec`` (the PDE spreads it per cell).
    """
    s, v, e, a, i, r = x
    n = s + v + e + a + i + r
    if np.any(n <= 0):
        raise ZeroPopulationError("total population must be positive")
    lam = beta_now * (a + p.eta * i) / n
    k = derive_rates(p)
    big_lambda = p.lambda_rec if recruitment is None else recruitment
    out = np.empty_like(x, dtype=float)
    out[0] = p.r1 * big_lambda + p.c2 * v - (k.k1 + lam) * s
    out[1] = p.r2 * big_lambda + p.c1 * s - (k.k2 + p.phi1 * lam) * v
    out[2] = lam * (s + p.phi1 * v + p.phi2 * r) - k.k3 * e
    out[3] = p.p * p.gamma * e - k.k4 * a
    out[4] = p.q * p.gamma * e + p.a2 * p.sigma * a - k.k5 * i
    out[5] = p.a1 * p.sigma * a + p.theta * i - (p.mu + p.phi2 * lam) * r
    return out


def rhs(p: Parameters, beta_now: float, st) -> np.ndarray:
    """Time derivative of (S, V, E, A, I, R) at ``st``."""
    return rhs_array(p, beta_now, _as_array(st))


def disease_free_equilibrium(p: Parameters) -> CompartmentState:
    k = derive_rates(p)
    if k.k6 <= 0:
        raise DegenerateParametersError("k1*k2 - c1*c2 must be positive (requires mu > 0)")
    s0 = k.k7 * p.lambda_rec / k.k6
    v0 = (k.k1 * p.r2 + p.c1 * p.r1) * p.lambda_rec / k.k6
    return CompartmentState(s0, v0, 0.0, 0.0, 0.0, 0.0)


def _dfe_weights(p: Parameters) -> tuple[float, float]:
    """Return (N1, N0) with N1 = S0 + phi1*V0 and N0 = Lambda/mu."""
    dfe = disease_free_equilibrium(p)
    return dfe.s + p.phi1 * dfe.v, p.lambda_rec / p.mu


def _susceptible_share(p: Parameters) -> float:
    """N1/N0, computed without Lambda so it is defined for Lambda = 0."""
    k = derive_rates(p)
    if k.k6 <= 0:
        raise DegenerateParametersError("k1*k2 - c1*c2 must be positive (requires mu > 0)")
    return p.mu * (k.k7 + p.phi1 * (k.k1 * p.r2 + p.c1 * p.r1)) / k.k6


def control_reproduction_number(p: Parameters) -> float:
    k = derive_rates(p)
    if min(k.k3, k.k4, k.k5) <= 0:
        raise DegenerateParametersError("k3, k4 and k5 must be positive")
    share = _susceptible_share(p)
    symptomatic = share * p.beta * p.eta * p.gamma * (p.a2 * p.p * p.sigma + k.k4 * p.q) / (k.k3 * k.k4 * k.k5)
    asymptomatic = share * p.beta * p.p * p.gamma / (k.k3 * k.k4)
    return symptomatic + asymptomatic


def beta_critical(p: Parameters) -> float:
    """Transmission rate at which R_c = 1, other parameters held fixed."""
    rc_unit = control_reproduction_number(p.replace(beta=1.0))
    if rc_unit <= 0:
        raise DegenerateParametersError("R_c is identically zero for these parameters")
    return 1.0 / rc_unit


def next_generation_matrices(p: Parameters) -> tuple[np.ndarray, np.ndarray]:
    """Jacobians (Z, W) of new-infection and transfer terms at the DFE."""
    k = derive_rates(p)
    share = _susceptible_share(p)
    z = np.zeros((3, 3))
    z[0, 1] = p.beta * share
    z[0, 2] = p.beta * p.eta * share
    w = np.array([
        [k.k3, 0.0, 0.0],
        [-p.p * p.gamma, k.k4, 0.0],
        [-p.q * p.gamma, -p.a2 * p.sigma, k.k5],
    ])
    return z, w


def gas_condition(p: Parameters, st) -> bool:
    """Sufficient condition for global stability of the DFE at state ``st``.

    True when ``N1/N0 - (S + phi1*V + phi2*R)/N >= 0``.
    """
    x = _as_array(st)
    n = x.sum()
    if n <= 0:
        raise ZeroPopulationError("total population must be positive")
    return _susceptible_share(p) - (x[0] + p.phi1 * x[1] + p.phi2 * x[5]) / n >= 0


def instantaneous_rc(p: Parameters, schedule: BetaSchedule, t) -> np.ndarray:
    """R_c evaluated with ``beta = schedule(t)``; R_c is linear in beta."""
    return control_reproduction_number(p.replace(beta=1.0)) * schedule(t)


def level_crossings(fn, level: float, t0: float, t1: float, n: int = 20001) -> np.ndarray:
    """Times in [t0, t1] where the scalar function ``fn`` crosses ``level``.

    ``fn`` is sampled on ``n`` points and each sign change is refined by
    Brent's method. Tangential touches without a sign change are missed.
    """
    from scipy.optimize import brentq

    ts = np.linspace(t0, t1, n)
    g = np.asarray(fn(ts), dtype=float) - level
    roots = [float(t) for t in ts[g == 0.0]]
    change = np.flatnonzero(g[:-1] * g[1:] < 0)
    for i in change:
        roots.append(brentq(lambda s: float(fn(s)) - level, ts[i], ts[i + 1], xtol=1e-12))
    return np.array(sorted(roots))
