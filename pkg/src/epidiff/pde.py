"""Reaction-diffusion SVEAIR model on a raster mask.

Each step is a Lie splitting: an explicit reaction substep with the force
of infection computed from the local cell population, then one backward
Euler diffusion solve per compartment, ``(I + dt*kappa*L) u = u_mid``,
by Jacobi-preconditioned conjugate gradients.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional, Sequence

import numpy as np
from numba import njit

from .errors import LinearSolverError, NegativityError, PeakOutsideMaskError, UnknownRegionError, GeometryError
from .geometry import LaplacianOperator, PolygonSet, RasterMask, write_pgm
from .model import COMPARTMENTS, BetaSchedule, Parameters, rhs_array
from .ode import NEGATIVITY_TOLERANCE

DEFAULT_KAPPA = (1.0, 1.0, 1.0, 1.0, 0.1, 1.0)


@dataclass
class Field:
    """Per-cell person counts, shape ``(6, n_active)`` in S, V, E, A, I, R order."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] != 6:
            raise ValueError("field values must have shape (6, n_cells)")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @property
    def n_cells(self) -> int:
        return self.values.shape[1]

    def totals(self) -> np.ndarray:
        return self.values.sum(axis=1)

    def compartment(self, name: str) -> np.ndarray:
        return self.values[COMPARTMENTS.index(name.upper())]

    def copy(self) -> Field:
        return Field(self.values.copy())


@dataclass(frozen=True)
class DiffusionConfig:
    kappa: tuple = DEFAULT_KAPPA

    def __post_init__(self):
        k = tuple(float(v) for v in self.kappa)
        if len(k) != 6:
            raise ValueError("kappa needs one value per compartment")
        if not all(math.isfinite(v) and v >= 0 for v in k):
            raise ValueError("diffusivities must be finite and nonnegative")
        object.__setattr__(self, "kappa", k)


@dataclass(frozen=True)
class PdeRunConfig:
    t_end: float
    dt: float = 0.05
    snapshot_times: tuple = ()
    linear_tol: float = 1e-10
    schedule: Optional[BetaSchedule] = None
    reaction: Literal["rk4", "euler"] = "rk4"
    max_linear_iter: int = 10_000
    threads: int = 1

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive")
        if not (self.t_end >= 0 and math.isfinite(self.t_end)):
            raise ValueError("t_end must be finite and nonnegative")
        if not 0 < self.linear_tol <= 1e-4:
            raise ValueError("linear_tol must lie in (0, 1e-4]")
        if self.reaction not in ("rk4", "euler"):
            raise ValueError("reaction must be 'rk4' or 'euler'")
        snaps = tuple(sorted(float(t) for t in self.snapshot_times))
        if any(t < 0 or t > self.t_end for t in snaps):
            raise ValueError("snapshot times must lie in [0, t_end]")
        object.__setattr__(self, "snapshot_times", snaps)


@dataclass(frozen=True)
class Peak:
    x: float
    y: float
    width: float = 0.3
    weight: float = 1.0


def _spread(weights: np.ndarray, total: float) -> np.ndarray:
    return weights * (total / weights.sum())


def initial_field(
    mask: RasterMask,
    kind: Literal["uniform", "peaks", "region"],
    totals: Sequence[float],
    peaks: Sequence[Peak] = (),
    region=None,
    regions: Optional[dict] = None,
    localized: Sequence[str] = ("V", "E", "A", "I", "R"),
) -> Field:
    """Initial cell values whose per-compartment sums equal ``totals``.

    ``uniform`` spreads every total evenly. ``peaks`` places the
    ``localized`` compartments as a sum of Gaussian bumps and ``region``
    spreads them evenly over a sub-region (a :class:`PolygonSet`, or a name
    looked up in ``regions``). Susceptibles are always uniform.
    """
    totals = np.asarray(totals, dtype=float).ravel()
    if totals.shape != (6,) or not np.all(np.isfinite(totals)) or np.any(totals < 0):
        raise ValueError("totals must be six finite nonnegative numbers")
    n = mask.n_active
    flat = np.ones(n)
    local = flat
    if kind == "peaks":
        if not peaks:
            raise ValueError("at least one peak is required")
        cx, cy = mask.cell_centers()
        local = np.zeros(n)
        for pk in peaks:
            cell = mask.locate(pk.x, pk.y)
            if cell < 0:
                raise PeakOutsideMaskError(f"peak at ({pk.x}, {pk.y}) is outside the mask")
            if not pk.width > 0:
                raise ValueError("peak width must be positive")
            bump = np.exp(-((cx - pk.x) ** 2 + (cy - pk.y) ** 2) / (2.0 * pk.width**2))
            if bump.sum() == 0.0:
                bump[cell] = 1.0
            local += pk.weight * bump / bump.sum()
    elif kind == "region":
        if isinstance(region, str):
            if not regions or region not in regions:
                raise UnknownRegionError(f"unknown region {region!r}")
            region = regions[region]
        if not isinstance(region, PolygonSet):
            raise UnknownRegionError("region must be a name or a PolygonSet")
        local = mask.region(region).astype(float)
        if not local.any():
            raise GeometryError("region contains no active cell")
    elif kind != "uniform":
        raise ValueError(f"unknown initial-field kind {kind!r}")

    names = {c.upper() for c in localized}
    unknown = names - set(COMPARTMENTS)
    if unknown:
        raise ValueError(f"unknown compartments {sorted(unknown)}")
    values = np.empty((6, n))
    for j, name in enumerate(COMPARTMENTS):
        values[j] = _spread(local if name in names else flat, totals[j])
    return Field(values)


@njit(cache=True, nogil=True, error_model="numpy")
def _pcg(indptr, indices, data, diag, scale, b, x, rtol, max_iter):
    # solves (I + scale*L) x = b; x holds the initial guess
    n = b.shape[0]
    r = np.empty(n)
    z = np.empty(n)
    p = np.empty(n)
    q = np.empty(n)
    bnorm = 0.0
    for i in range(n):
        bnorm += b[i] * b[i]
    bnorm = math.sqrt(bnorm)
    if bnorm == 0.0:
        for i in range(n):
            x[i] = 0.0
        return 0
    rz = 0.0
    rr = 0.0
    for i in range(n):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            acc += data[k] * x[indices[k]]
        r[i] = b[i] - x[i] - scale * acc
        z[i] = r[i] / (1.0 + scale * diag[i])
        p[i] = z[i]
        rz += r[i] * z[i]
        rr += r[i] * r[i]
    it = 0
    while math.sqrt(rr) > rtol * bnorm:
        if it >= max_iter:
            return -1
        pq = 0.0
        for i in range(n):
            acc = 0.0
            for k in range(indptr[i], indptr[i + 1]):
                acc += data[k] * p[indices[k]]
            q[i] = p[i] + scale * acc
            pq += p[i] * q[i]
        if not pq > 0.0:
            # breakdown: the operator is SPD, so this means non-finite input
            return -1
        alpha = rz / pq
        rz_new = 0.0
        rr = 0.0
        for i in range(n):
            x[i] += alpha * p[i]
            r[i] -= alpha * q[i]
            z[i] = r[i] / (1.0 + scale * diag[i])
            rz_new += r[i] * z[i]
            rr += r[i] * r[i]
        beta = rz_new / rz
        rz = rz_new
        for i in range(n):
            p[i] = z[i] + beta * p[i]
        it += 1
    return it


def _diffuse(L: LaplacianOperator, u: np.ndarray, scale: float, tol: float, max_iter: int) -> np.ndarray:
    if scale == 0.0:
        return u
    m = L.stencil
    x = u.copy()
    status = _pcg(m.indptr, m.indices, m.data, m.diagonal(), scale * L.inv_h2, u, x, tol, max_iter)
    if status < 0:
        raise LinearSolverError(f"conjugate gradients did not reach {tol:g} in {max_iter} iterations")
    return x


def _reaction(p: Parameters, beta_fn, t: float, x: np.ndarray, dt: float, recruitment: float, scheme: str) -> np.ndarray:
    if scheme == "euler":
        return x + dt * rhs_array(p, beta_fn(t), x, recruitment)
    k1 = rhs_array(p, beta_fn(t), x, recruitment)
    k2 = rhs_array(p, beta_fn(t + 0.5 * dt), x + 0.5 * dt * k1, recruitment)
    k3 = rhs_array(p, beta_fn(t + 0.5 * dt), x + 0.5 * dt * k2, recruitment)
    k4 = rhs_array(p, beta_fn(t + dt), x + dt * k3, recruitment)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _clamp(x: np.ndarray, t: float) -> np.ndarray:
    scale = np.maximum(x.sum(axis=0), 1.0)
    floor = -NEGATIVITY_TOLERANCE * scale
    if np.any(x < floor):
        j, c = np.unravel_index(np.argmin(x - floor), x.shape)
        raise NegativityError(f"{COMPARTMENTS[j]} became negative ({x[j, c]:.3g}) in cell {c}", t)
    return np.maximum(x, 0.0)


def step(
    fld: Field,
    p: Parameters,
    beta_now,
    L: LaplacianOperator,
    diff: DiffusionConfig,
    dt: float,
    t: float = 0.0,
    linear_tol: float = 1e-10,
    reaction: str = "rk4",
    max_linear_iter: int = 10_000,
    executor: Optional[ThreadPoolExecutor] = None,
) -> Field:
    """Advance one split step of length ``dt``.

    ``beta_now`` is a number or a callable of time. Recruitment is spread
    as ``lambda_rec / n_cells`` per cell.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if L.shape[0] != fld.n_cells:
        raise ValueError("Laplacian and field sizes differ")
    beta_fn = beta_now if callable(beta_now) else (lambda _t, b=float(beta_now): b)
    x = _reaction(p, beta_fn, t, fld.values, dt, p.lambda_rec / fld.n_cells, reaction)
    x = _clamp(x, t + dt)

    def solve(j):
        return _diffuse(L, x[j], dt * diff.kappa[j], linear_tol, max_linear_iter)

    try:
        rows = list(executor.map(solve, range(6))) if executor else [solve(j) for j in range(6)]
    except LinearSolverError as exc:
        raise LinearSolverError(str(exc), t + dt) from None
    return Field(_clamp(np.vstack(rows), t + dt))


@dataclass
class PdeResult:
    times: np.ndarray
    totals: np.ndarray  # (n_times, 6) spatial sums
    snapshots: dict = field(default_factory=dict)  # time -> Field
    mask: Optional[RasterMask] = None

    def totals_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", *COMPARTMENTS])
            for t, row in zip(self.times, self.totals):
                w.writerow([repr(float(t)), *(repr(float(v)) for v in row)])

    def export_snapshots(self, directory) -> list[Path]:
        """One plain 16-bit PGM per compartment and snapshot, plus ``scales.json``.

        A gray level g encodes ``g / 65535 * vmax`` persons per cell.
        """
        if self.mask is None:
            raise ValueError("result has no mask attached")
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        written, scales = [], []
        for t, fld in sorted(self.snapshots.items()):
            for j, name in enumerate(COMPARTMENTS):
                vmax = float(fld.values[j].max())
                gray = np.zeros(fld.n_cells) if vmax == 0 else np.rint(fld.values[j] / vmax * 65535)
                path = out / f"{name}_t{t:g}.pgm"
                write_pgm(path, self.mask.to_grid(gray), maxval=65535)
                written.append(path)
                scales.append({"file": path.name, "t": t, "compartment": name, "vmax": vmax})
        (out / "scales.json").write_text(json.dumps(scales, indent=2))
        return written


def integrate_pde(
    field0: Field,
    p: Parameters,
    cfg: PdeRunConfig,
    L: LaplacianOperator,
    diff: DiffusionConfig = DiffusionConfig(),
    mask: Optional[RasterMask] = None,
) -> PdeResult:
    """Step from 0 to ``cfg.t_end``; totals are kept at every step.

    Snapshots are taken at the step boundary nearest to each requested
    time. The final step is shortened to land on ``t_end``.
    """
    n_steps = max(0, math.ceil(cfg.t_end / cfg.dt - 1e-9))
    step_ends = np.minimum(np.arange(1, n_steps + 1) * cfg.dt, cfg.t_end)
    times = np.concatenate([[0.0], step_ends])
    snap_index = {int(np.argmin(np.abs(times - ts))): ts for ts in cfg.snapshot_times}
    beta = cfg.schedule if cfg.schedule is not None else p.beta

    totals = np.empty((len(times), 6))
    totals[0] = field0.totals()
    snapshots = {snap_index[0]: field0.copy()} if 0 in snap_index else {}
    fld = field0
    executor = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None
    try:
        for k in range(1, len(times)):
            fld = step(
                fld, p, beta, L, diff, times[k] - times[k - 1], t=times[k - 1],
                linear_tol=cfg.linear_tol, reaction=cfg.reaction,
                max_linear_iter=cfg.max_linear_iter, executor=executor,
            )
            totals[k] = fld.totals()
            if k in snap_index:
                snapshots[snap_index[k]] = fld.copy()
    finally:
        if executor:
            executor.shutdown()
    return PdeResult(times, totals, snapshots, mask)
