"""Least-squares calibration of the ODE model to cumulative case counts."""
from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from .errors import IntegrationError, ModelError
from .model import CompartmentState, Parameters, control_reproduction_number
from .ode import IntegratorConfig, integrate
from .presets import FREE_PARAMETERS

log = logging.getLogger(__name__)

# box bounds used when a free parameter has none configured
DEFAULT_BOUNDS = {
    "beta": (0.0, 5.0),
    "phi2": (0.0, 1.0),
    "r1": (0.0, 1.0),
    "a1": (0.0, 1.0),
    "c2": (0.0, 5.0),
    "eta": (0.0, 1.0),
    "theta": (0.0, 5.0),
    "gamma": (0.0, 5.0),
    "c1": (0.0, 5.0),
    "sigma": (0.0, 5.0),
    "delta": (0.0, 1.0),
    "p": (0.0, 1.0),
    "phi1": (0.0, 1.0),
}

FIT_INTEGRATOR = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-8)


@dataclass(frozen=True)
class ObservationSeries:
    times: np.ndarray
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape:
            raise ValueError("times and values must be 1-D arrays of equal length")
        if len(times) == 0:
            raise ValueError("observation series is empty")
        if np.any(np.diff(times) <= 0):
            raise ValueError("observation times must be strictly increasing")
        if np.any(values < 0) or np.any(np.diff(values) < 0):
            raise ValueError("cumulative values must be nonnegative and nondecreasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.times)

    @classmethod
    def from_csv(cls, path, label: Optional[str] = None) -> ObservationSeries:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["t", "cumulative_cases"]:
                raise ValueError(f"{path}: expected header 't,cumulative_cases', got {header!r}")
            rows = [row for row in reader if row and any(cell.strip() for cell in row)]
        if not rows:
            raise ValueError(f"{path}: no observations")
        try:
            data = np.array([[float(a), float(b)] for a, b in rows])
        except ValueError as exc:
            raise ValueError(f"{path}: malformed row ({exc})") from None
        # row order in the file is irrelevant; duplicates still fail validation
        data = data[np.argsort(data[:, 0], kind="stable")]
        return cls(data[:, 0], data[:, 1], label or os.path.basename(str(path)))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "cumulative_cases"])
            for t, v in zip(self.times, self.values):
                writer.writerow([repr(float(t)), repr(float(v))])


@dataclass(frozen=True)
class CalibrationSpec:
    fixed: Parameters
    x0: CompartmentState
    free_names: tuple[str, ...] = FREE_PARAMETERS
    lower: Optional[tuple[float, ...]] = None
    upper: Optional[tuple[float, ...]] = None
    initial_guess: Optional[tuple[float, ...]] = None
    c0: float = 0.0
    t0: Optional[float] = None

    def __post_init__(self):
        names = tuple(self.free_names)
        valid = set(Parameters.field_names())
        unknown = [n for n in names if n not in valid]
        if unknown:
            raise ValueError(f"unknown free parameters: {unknown}")
        if len(set(names)) != len(names):
            raise ValueError("free parameter names must be unique")
        lower = self.lower if self.lower is not None else tuple(DEFAULT_BOUNDS.get(n, (0.0, 10.0))[0] for n in names)
        upper = self.upper if self.upper is not None else tuple(DEFAULT_BOUNDS.get(n, (0.0, 10.0))[1] for n in names)
        guess = self.initial_guess if self.initial_guess is not None else tuple(getattr(self.fixed, n) for n in names)
        lower, upper, guess = (tuple(float(v) for v in seq) for seq in (lower, upper, guess))
        if not len(lower) == len(upper) == len(guess) == len(names):
            raise ValueError("bounds and guess must match free_names in length")
        for n, lo, hi, g in zip(names, lower, upper, guess):
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
                raise ValueError(f"{n}: bounds must be finite with lower < upper")
            if not lo <= g <= hi:
                raise ValueError(f"{n}: initial guess {g!r} outside [{lo!r}, {hi!r}]")
        object.__setattr__(self, "free_names", names)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "initial_guess", guess)

    def assemble(self, theta: Sequence[float]) -> Parameters:
        return self.fixed.replace(**{n: float(v) for n, v in zip(self.free_names, theta)})


@dataclass
class FitResult:
    fitted: Parameters
    objective: float
    iterations: int
    converged: bool
    residuals: np.ndarray
    theta: np.ndarray
    singular_values: np.ndarray = field(default_factory=lambda: np.empty(0))
    method: str = "gauss-newton-damped"
    history: list = field(default_factory=list)

    def to_dict(self, free_names: Sequence[str] = FREE_PARAMETERS) -> dict:
        try:
            rc = control_reproduction_number(self.fitted)
        except ModelError:
            rc = None
        return {
            "fitted": {n: getattr(self.fitted, n) for n in free_names},
            "parameters": self.fitted.to_dict(),
            "objective": self.objective,
            "rc": rc,
            "converged": self.converged,
            "iterations": self.iterations,
            "method": self.method,
            "singular_values": [float(s) for s in self.singular_values],
        }


def predict(spec: CalibrationSpec, theta, times, cfg: IntegratorConfig = FIT_INTEGRATOR) -> np.ndarray:
    """Cumulative reported cases at ``times`` for free parameters ``theta``."""
    params = spec.assemble(theta)
    times = np.asarray(times, dtype=float)
    t0 = float(times[0]) if spec.t0 is None else float(spec.t0)
    if times[-1] <= t0:
        return np.full(times.shape, spec.c0)
    traj = integrate(params, None, spec.x0, t0, float(times[-1]), times, cfg, c0=spec.c0)
    return traj.cum_reported


def _residuals(spec: CalibrationSpec, theta, data: ObservationSeries, cfg=FIT_INTEGRATOR) -> Optional[np.ndarray]:
    try:
        pred = predict(spec, theta, data.times, cfg)
    except (IntegrationError, ModelError) as exc:
        log.info("objective evaluation failed at theta=%s: %s", list(theta), exc)
        return None
    return (pred - data.values) / math.sqrt(len(data))


def objective(spec: CalibrationSpec, theta, data: ObservationSeries) -> float:
    """Root-mean-square misfit between predicted and observed cumulative cases.

    Integration or parameter failures yield ``inf``.
    """
    r = _residuals(spec, theta, data)
    return math.inf if r is None else float(np.linalg.norm(r))


class _Transform:
    """Logistic map from the real line onto each open bound interval."""

    def __init__(self, lower, upper):
        self.lo = np.asarray(lower, dtype=float)
        self.width = np.asarray(upper, dtype=float) - self.lo

    def to_theta(self, z):
        theta = self.lo + self.width * expit(np.asarray(z, dtype=float))
        # keep iterates strictly inside the box despite rounding
        return np.clip(theta, np.nextafter(self.lo, np.inf), np.nextafter(self.lo + self.width, -np.inf))

    def to_z(self, theta):
        u = (np.asarray(theta, dtype=float) - self.lo) / self.width
        u = np.clip(u, 1e-12, 1 - 1e-12)
        return np.log(u) - np.log1p(-u)


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get("EPIDIFF_THREADS", "1")))
    except ValueError:
        return 1


def _jacobian(fun, z, r0, rel_step=1e-6):
    steps = rel_step * np.maximum(np.abs(z), 1.0)

    def column(j):
        zj = z.copy()
        zj[j] += steps[j]
        rj = fun(zj)
        if rj is None:
            return np.full(r0.shape, np.nan)
        return (rj - r0) / steps[j]

    workers = _thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cols = list(pool.map(column, range(len(z))))
    else:
        cols = [column(j) for j in range(len(z))]
    return np.column_stack(cols)


def _fit_simplex(fun_obj, z0, max_iter):
    # deterministic initial simplex: unit offsets along each axis
    n = len(z0)
    simplex = np.vstack([z0] + [z0 + np.eye(n)[j] * 0.5 for j in range(n)])
    res = minimize(
        fun_obj,
        z0,
        method="Nelder-Mead",
        options={"maxiter": max_iter, "initial_simplex": simplex, "xatol": 1e-10, "fatol": 1e-12},
    )
    return res.x, int(res.nit), bool(res.success)


def fit(
    spec: CalibrationSpec,
    data: ObservationSeries,
    method: Literal["gauss-newton-damped", "simplex"] = "gauss-newton-damped",
    max_iter: int = 200,
    rank_rcond: float = 1e-10,
    diag_floor: float = 1e-6,
    data_tol: float = 1e-9,
) -> FitResult:
    """Fit the free parameters of ``spec`` to ``data``.

    The damped Gauss-Newton iteration (Levenberg-Marquardt with Nielsen's
    damping update) works on logistic-transformed parameters so every
    iterate stays in the open bound box. When no damped step decreases the
    objective and the Jacobian's condition number exceeds ``1/rank_rcond``,
    the remaining budget goes to a Nelder-Mead simplex search. The fit also
    stops as converged once the RMSE is below ``data_tol * max|data|``, the
    integrator's noise floor. Non-convergence is reported through
    ``converged=False``; the best point found is returned.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    tr = _Transform(spec.lower, spec.upper)
    z = tr.to_z(spec.initial_guess)

    def res_z(zz):
        return _residuals(spec, tr.to_theta(zz), data)

    def obj_z(zz):
        r = res_z(zz)
        return math.inf if r is None else float(r @ r)

    def result(zz, iterations, converged, sv, used, history):
        theta = tr.to_theta(zz)
        r = res_z(zz)
        r = np.full(len(data), np.inf) if r is None else r
        return FitResult(
            fitted=spec.assemble(theta),
            objective=float(np.linalg.norm(r)),
            iterations=iterations,
            converged=converged,
            residuals=r * math.sqrt(len(data)),
            theta=theta,
            singular_values=sv,
            method=used,
            history=history,
        )

    if method == "simplex":
        z_best, nit, ok = _fit_simplex(obj_z, z, max_iter)
        return result(z_best, nit, ok, np.empty(0), "simplex", [])
    if method != "gauss-newton-damped":
        raise ValueError(f"unknown method {method!r}")

    r = res_z(z)
    if r is None:
        return result(z, 0, False, np.empty(0), method, [])
    cost = float(r @ r)
    history = [math.sqrt(cost)]
    damping = None
    nu = 2.0
    small_decreases = 0
    sv = np.empty(0)
    converged = False
    it = 0
    floor = data_tol * float(np.max(np.abs(data.values)))
    while it < max_iter:
        if math.sqrt(cost) <= floor:
            converged = True
            break
        it += 1
        jac = _jacobian(res_z, z, r)
        if not np.all(np.isfinite(jac)):
            log.info("non-finite Jacobian at iteration %d; switching to simplex", it)
            z, nit, ok = _fit_simplex(obj_z, z, max_iter - it)
            return result(z, it + nit, ok, sv, "simplex", history)
        sv = np.linalg.svd(jac, compute_uv=False)
        rank_deficient = sv[0] == 0 or sv[-1] / sv[0] < rank_rcond
        grad = jac.T @ r
        if np.max(np.abs(grad)) < 1e-10:
            converged = True
            break
        jtj = jac.T @ jac
        # the floor keeps near-null directions from taking noise-driven jumps
        diag = np.maximum(np.diag(jtj), diag_floor * np.max(np.diag(jtj)))
        if damping is None:
            damping = 1e-3
        accepted = False
        while not accepted:
            lhs = jtj + damping * np.diag(diag)
            try:
                step = np.linalg.solve(lhs, -grad)
            except np.linalg.LinAlgError:
                damping *= nu
                nu *= 2
                continue
            z_new = z + step
            r_new = res_z(z_new)
            cost_new = math.inf if r_new is None else float(r_new @ r_new)
            predicted = -(2 * step @ grad + step @ jtj @ step)
            if cost_new < cost and predicted > 0:
                rho = (cost - cost_new) / predicted
                damping *= max(1 / 3, 1 - (2 * rho - 1) ** 3)
                nu = 2.0
                rel_decrease = (cost - cost_new) / cost if cost > 0 else 0.0
                z, r, cost = z_new, r_new, cost_new
                history.append(math.sqrt(cost))
                accepted = True
                small_decreases = small_decreases + 1 if rel_decrease < 1e-10 else 0
            else:
                damping *= nu
                nu *= 2
                if damping > 1e16 or not np.all(np.isfinite(step)):
                    break
        if not accepted:
            if rank_deficient:
                log.info("damped step stalled on a rank-deficient Jacobian; switching to simplex")
                z, nit, ok = _fit_simplex(obj_z, z, max(max_iter - it, 1))
                return result(z, it + nit, ok, sv, "simplex", history)
            # no descent direction left at machine precision
            converged = True
            break
        if small_decreases >= 3 or cost == 0.0:
            converged = True
            break
    return result(z, it, converged, sv, method, history)
