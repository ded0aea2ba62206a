"""Adaptive time integration of the SVEAIR ODE system.

The integrator is an explicit Dormand-Prince 5(4) pair with a PI step-size
controller. The state is augmented with the cumulative count of reported
cases ``C``, whose rate is the total inflow into the symptomatic class
``q*gamma*E + a2*sigma*A``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
from numba import njit

from .errors import NegativityError, StepSizeUnderflowError
from .model import COMPARTMENTS, BetaSchedule, CompartmentState, Parameters

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.array([
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1 / 5, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3 / 40, 9 / 40, 0.0, 0.0, 0.0, 0.0],
    [44 / 45, -56 / 15, 32 / 9, 0.0, 0.0, 0.0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0.0, 0.0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0.0],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
])
# difference between the 5th and the embedded 4th order weights
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

# PI controller exponents (Hairer, Norsett & Wanner, II.4)
_BETA_PI = 0.04
_ALPHA_PI = 1 / 5 - 0.75 * _BETA_PI
_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0

NEGATIVITY_TOLERANCE = 1e-9

_OK, _UNDERFLOW, _NEGATIVE = 0, 1, 2


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-6
    max_step: float = math.inf
    initial_step: Optional[float] = None

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")
        if self.initial_step is not None and not self.initial_step > 0:
            raise ValueError("initial_step must be positive")


@dataclass
class Trajectory:
    """Solution sampled on an output grid.

    ``states`` has shape ``(len(times), 6)`` in (S, V, E, A, I, R) order.
    """

    times: np.ndarray
    states: np.ndarray
    cum_reported: np.ndarray

    def __len__(self):
        return len(self.times)

    def state(self, k: int) -> CompartmentState:
        return CompartmentState.from_array(self.states[k])

    @property
    def totals(self) -> np.ndarray:
        return self.states.sum(axis=1)

    def column(self, name: str) -> np.ndarray:
        return self.states[:, COMPARTMENTS.index(name)]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", *COMPARTMENTS, "C"])
            for t, x, c in zip(self.times, self.states, self.cum_reported):
                writer.writerow([repr(float(t))] + [repr(float(v)) for v in x] + [repr(float(c))])

    @classmethod
    def from_csv(cls, path) -> Trajectory:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1:7], data[:, 7])


def _pack(p: Parameters, schedule: Optional[BetaSchedule]) -> tuple[np.ndarray, np.ndarray]:
    params = np.array([getattr(p, name) for name in Parameters.field_names()])
    if schedule is None:
        sched = np.array([0.0, p.beta, 0.0, 0.0, 1.0])
    else:
        sched = np.array([1.0, schedule.beta0, schedule.alpha, schedule.b, schedule.period])
    return params, sched


@njit(cache=True, error_model="numpy")
def _augmented_rhs(t, y, params, sched, out):
    lam_rec, mu, beta, eta, phi1, phi2, c1, c2, r1, p, a1, gamma, sigma, theta, delta = params
    if sched[0] != 0.0:
        beta = sched[1] * (1.0 + sched[2] * math.cos(2.0 * math.pi * t / sched[4] + sched[3]))
    s, v, e, a, i, r = y[0], y[1], y[2], y[3], y[4], y[5]
    n = s + v + e + a + i + r
    lam = beta * (a + eta * i) / n
    out[0] = r1 * lam_rec + c2 * v - (c1 + mu + lam) * s
    out[1] = (1.0 - r1) * lam_rec + c1 * s - (mu + c2 + phi1 * lam) * v
    out[2] = lam * (s + phi1 * v + phi2 * r) - (mu + gamma) * e
    out[3] = p * gamma * e - (mu + sigma) * a
    inflow_i = (1.0 - p) * gamma * e + (1.0 - a1) * sigma * a
    out[4] = inflow_i - (mu + delta + theta) * i
    out[5] = a1 * sigma * a + theta * i - (mu + phi2 * lam) * r
    out[6] = inflow_i


@njit(cache=True, error_model="numpy")
def _rms(err, y, y_new, rtol, atol):
    acc = 0.0
    for j in range(y.size):
        sc = atol + rtol * max(abs(y[j]), abs(y_new[j]))
        acc += (err[j] / sc) ** 2
    return math.sqrt(acc / y.size)


@njit(cache=True, error_model="numpy")
def _initial_step(t0, y0, f0, params, sched, span, rtol, atol, max_step):
    # Hairer's starting-step heuristic
    d0 = 0.0
    d1 = 0.0
    for j in range(y0.size):
        sc = atol + rtol * abs(y0[j])
        d0 += (y0[j] / sc) ** 2
        d1 += (f0[j] / sc) ** 2
    d0 = math.sqrt(d0 / y0.size)
    d1 = math.sqrt(d1 / y0.size)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    if not h0 > 0.0:
        # derivative norm overflowed
        h0 = 1e-12 * max(span, 1.0)
    h0 = min(h0, span, max_step)
    f1 = np.empty_like(y0)
    _augmented_rhs(t0 + h0, y0 + h0 * f0, params, sched, f1)
    d2 = 0.0
    for j in range(y0.size):
        sc = atol + rtol * abs(y0[j])
        d2 += ((f1[j] - f0[j]) / sc) ** 2
    d2 = math.sqrt(d2 / y0.size) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    if not math.isfinite(h1):
        h1 = h0
    return min(100.0 * h0, h1, span, max_step)


@njit(cache=True, error_model="numpy")
def _dopri_kernel(params, sched, y0, t0, outputs, rtol, atol, max_step, h_init, floor, a_tab, c_tab, e_tab):
    m = outputs.size
    dim = y0.size
    out = np.empty((m, dim))
    k = np.empty((7, dim))
    y = y0.copy()
    y_stage = np.empty(dim)
    y_new = np.empty(dim)
    err = np.empty(dim)
    t = t0
    _augmented_rhs(t, y, params, sched, k[0])
    h = h_init
    if h <= 0.0:
        h = _initial_step(t, y, k[0], params, sched, outputs[m - 1] - t0 if outputs[m - 1] > t0 else 1.0,
                          rtol, atol, max_step)
    err_prev = 1e-4
    n_accept = 0
    n_reject = 0
    idx = 0
    while idx < m and outputs[idx] <= t:
        out[idx] = y
        idx += 1
    while idx < m:
        target = outputs[idx]
        h = min(h, max_step)
        truncated = t + h >= target
        h_step = target - t if truncated else h
        if h_step <= 1e-14 * max(abs(t), 1.0):
            return out, _UNDERFLOW, t, n_accept, n_reject
        for s in range(1, 7):
            for j in range(dim):
                acc = 0.0
                for q in range(s):
                    acc += a_tab[s, q] * k[q, j]
                y_stage[j] = y[j] + h_step * acc
            _augmented_rhs(t + c_tab[s] * h_step, y_stage, params, sched, k[s])
        # stage 7 is evaluated at the 5th order solution (FSAL)
        for j in range(dim):
            y_new[j] = y_stage[j]
            acc = 0.0
            for q in range(7):
                acc += e_tab[q] * k[q, j]
            err[j] = h_step * acc
        err_norm = _rms(err, y, y_new, rtol, atol)
        if not math.isfinite(err_norm):
            n_reject += 1
            h = h_step * _MIN_FACTOR
            continue
        if err_norm <= 1.0:
            clamped = False
            for j in range(6):
                if y_new[j] < floor:
                    return out, _NEGATIVE, t + h_step, n_accept, n_reject
                if y_new[j] < 0.0:
                    y_new[j] = 0.0
                    clamped = True
            # the observer's exact increments are nonnegative
            if y_new[6] < y[6]:
                y_new[6] = y[6]
            t = target if truncated else t + h_step
            for j in range(dim):
                y[j] = y_new[j]
            if clamped:
                _augmented_rhs(t, y, params, sched, k[0])
            else:
                for j in range(dim):
                    k[0, j] = k[6, j]
            factor = _SAFETY * max(err_norm, 1e-10) ** -_ALPHA_PI * err_prev ** _BETA_PI
            factor = min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
            err_prev = max(err_norm, 1e-4)
            h = max(h, h_step * factor) if truncated else h_step * factor
            n_accept += 1
            while idx < m and outputs[idx] <= t:
                out[idx] = y
                idx += 1
        else:
            n_reject += 1
            h = h_step * max(_MIN_FACTOR, _SAFETY * err_norm ** -0.2)
    return out, _OK, t, n_accept, n_reject


def integrate(
    p: Parameters,
    schedule: Optional[BetaSchedule],
    x0,
    t0: float,
    t1: float,
    outputs=None,
    cfg: IntegratorConfig = IntegratorConfig(),
    c0: float = 0.0,
) -> Trajectory:
    """Integrate the model from ``t0`` to ``t1``, sampling at ``outputs``.

    Steps are shortened to land exactly on each output time, so no
    interpolation is involved. Small negative components produced near
    extinction (above ``-max(1e-9 * N0, 10 * abs_tol)``) are reset to zero after every accepted
    step; anything lower raises :class:`NegativityError`.
    """
    x0 = x0.as_array() if isinstance(x0, CompartmentState) else np.asarray(x0, dtype=float)
    if x0.shape != (6,) or np.any(x0 < 0) or x0.sum() <= 0:
        raise ValueError("x0 must be 6 nonnegative components with positive total")
    if not t1 > t0:
        raise ValueError("t1 must exceed t0")
    outputs = np.array([t0, t1] if outputs is None else outputs, dtype=float)
    if outputs.ndim != 1 or len(outputs) == 0:
        raise ValueError("outputs must be a nonempty 1-D grid")
    if np.any(np.diff(outputs) <= 0):
        raise ValueError("outputs must be strictly increasing")
    if outputs[0] < t0 or outputs[-1] > t1:
        raise ValueError("outputs must lie within [t0, t1]")

    params, sched = _pack(p, schedule)
    n_ref = max(p.lambda_rec / p.mu if p.mu > 0 else 0.0, x0.sum())
    # components near zero are only resolved to abs_tol (RMS over 7 entries)
    floor = -max(NEGATIVITY_TOLERANCE * n_ref, 10.0 * cfg.abs_tol)
    y0 = np.append(x0, float(c0))
    out, status, t_stop, _, _ = _dopri_kernel(
        params, sched, y0, float(t0), outputs, cfg.rel_tol, cfg.abs_tol, cfg.max_step,
        cfg.initial_step or 0.0, floor, _A, _C, _E,
    )
    if status == _UNDERFLOW:
        raise StepSizeUnderflowError("step size underflow", t_stop)
    if status == _NEGATIVE:
        raise NegativityError("state component fell below the negativity tolerance", t_stop)
    return Trajectory(outputs, out[:, :6].copy(), out[:, 6].copy())


LongRunVerdict = Literal["converged_to_dfe", "endemic", "undecided"]


def long_run_classifier(
    p: Parameters,
    x0,
    horizon: float,
    schedule: Optional[BetaSchedule] = None,
    cfg: IntegratorConfig = IntegratorConfig(),
) -> LongRunVerdict:
    """Classify the long-run behaviour from an integration to ``horizon``.

    ``converged_to_dfe`` when E+A+I ends below ``1e-6 * N0``; ``endemic``
    when it ends above that threshold and changed by less than 1e-4
    (relative) over the final 10% of the horizon; otherwise ``undecided``.
    """
    x0 = x0.as_array() if isinstance(x0, CompartmentState) else np.asarray(x0, dtype=float)
    n0 = p.lambda_rec / p.mu if p.mu > 0 else x0.sum()
    traj = integrate(p, schedule, x0, 0.0, horizon, [0.9 * horizon, horizon], cfg)
    infected = traj.states[:, 2:5].sum(axis=1)
    threshold = 1e-6 * n0
    if infected[-1] < threshold:
        return "converged_to_dfe"
    if abs(infected[-1] - infected[0]) / infected[-1] < 1e-4:
        return "endemic"
    return "undecided"
