"""Command-line entry point: ``epidiff <command> [options]``.

A scenario is a JSON document. ``"preset"`` names a built-in scenario whose
fields are deep-merged under the document's own fields; ``--set a.b=value``
overrides are applied last (values are parsed as JSON when possible).
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .calibration import DEFAULT_BOUNDS, CalibrationSpec, ObservationSeries, fit, predict
from .equilibria import analyze
from .errors import ConfigError, GeometryError, IntegrationError, ModelError
from .geometry import build_laplacian, bundled_geometry, load_polygons, rasterize
from .model import (
    COMPARTMENTS,
    BetaSchedule,
    CompartmentState,
    Parameters,
    beta_critical,
    control_reproduction_number,
    disease_free_equilibrium,
    instantaneous_rc,
    level_crossings,
)
from .ode import IntegratorConfig, integrate, long_run_classifier
from .pde import DEFAULT_KAPPA, DiffusionConfig, Peak, PdeRunConfig, initial_field, integrate_pde
from .presets import (
    CAMEROON,
    CAMEROON_INITIAL,
    FREE_PARAMETERS,
    GERMANY,
    GERMANY_INITIAL,
    OSCILLATION_ALPHA,
    OSCILLATION_PERIOD,
    OSCILLATION_PHASE,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3

GERMANY_SOUTH = {"x": 11.0, "y": 47.7, "width": 0.3}
GERMANY_WEST = {"x": 6.5, "y": 51.0, "width": 0.3}
CAMEROON_SOUTH = {"x": 11.0, "y": 2.8, "width": 0.3}
CAMEROON_NORTH = {"x": 14.5, "y": 11.5, "width": 0.3}

# beta levels quoted for the seasonal scenario
OSCILLATION_CHECKPOINTS = (0.85445, 0.81946)


def _base(params: Parameters, initial: CompartmentState, unit: str, horizon: float) -> dict:
    return {
        "parameters": params.to_dict(),
        "initial": initial.to_dict(),
        "time_unit": unit,
        "horizon": horizon,
        "output_step": 1.0,
    }


def _pde(base: dict, source: str, peaks=None, region=None, horizon=500.0, snapshots=(250.0, 500.0)) -> dict:
    doc = copy.deepcopy(base)
    doc.update(
        horizon=horizon,
        geometry={"source": source, "nx": 64},
        initial_field={"kind": "region", "region": region} if region else {"kind": "peaks", "peaks": peaks},
        diffusion={"kappa": list(DEFAULT_KAPPA)},
        pde={"dt": 0.05, "snapshot_times": list(snapshots), "linear_tol": 1e-10, "reaction": "rk4"},
    )
    return doc


_GERMANY = _base(GERMANY, GERMANY_INITIAL, "day", 59.0)
_CAMEROON = _base(CAMEROON, CAMEROON_INITIAL, "month", 24.0)

SCENARIOS: dict[str, dict] = {
    "germany": _GERMANY,
    "cameroon": _CAMEROON,
    "germany-one-peak": _pde(_GERMANY, "germany", [GERMANY_SOUTH]),
    "germany-two-peaks": _pde(_GERMANY, "germany", [GERMANY_SOUTH, GERMANY_WEST]),
    "bavaria": _pde(_GERMANY, "germany", region="Bavaria"),
    "cameroon-one-peak": _pde(_CAMEROON, "cameroon", [CAMEROON_SOUTH]),
    "cameroon-two-peaks": _pde(_CAMEROON, "cameroon", [CAMEROON_SOUTH, CAMEROON_NORTH]),
    "oscillating-beta": {
        **_pde(_GERMANY, "germany", [GERMANY_SOUTH], horizon=750.0, snapshots=(10.0, 250.0, 500.0, 750.0)),
        "schedule": {
            "beta0": GERMANY.beta,
            "alpha": OSCILLATION_ALPHA,
            "b": OSCILLATION_PHASE,
            "period": OSCILLATION_PERIOD,
        },
    },
}
SCENARIOS["two-peaks"] = SCENARIOS["germany-two-peaks"]

_TOP_KEYS = {
    "name", "preset", "parameters", "initial", "time_unit", "horizon", "output_step",
    "classifier_horizon", "integrator", "schedule", "geometry", "initial_field",
    "diffusion", "pde", "calibration",
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in over.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(doc: dict, assignment: str) -> None:
    """Apply one ``dotted.path=value`` override in place."""
    if "=" not in assignment:
        raise ConfigError(assignment, "override must look like key=value")
    path, raw = assignment.split("=", 1)
    keys = path.strip().split(".")
    if not all(keys):
        raise ConfigError(path, "empty key in dotted path")
    node = doc
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(path, f"{k!r} is not an object")
    node[keys[-1]] = _parse_value(raw)


def load_config(source: Optional[str], overrides=()) -> dict:
    """Resolve a scenario name or JSON file into a merged config document."""
    if source is None:
        raise ConfigError("--config", "a scenario name or JSON file is required")
    if source in SCENARIOS:
        doc = {"preset": source}
    else:
        path = Path(source)
        if not path.is_file():
            raise ConfigError("--config", f"{source!r} is neither a preset ({', '.join(sorted(SCENARIOS))}) nor a file")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(source, f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        if not isinstance(doc, dict):
            raise ConfigError(source, "top level must be a JSON object")
    for item in overrides:
        apply_override(doc, item)
    preset = doc.get("preset")
    if preset is not None:
        if preset not in SCENARIOS:
            raise ConfigError("preset", f"unknown preset {preset!r}")
        doc = _merge(SCENARIOS[preset], doc)
        doc.setdefault("name", preset)
    return doc


def _number(value, path: str, positive=False, nonneg=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(path, "must be finite")
    if positive and value <= 0:
        raise ConfigError(path, "must be positive")
    if nonneg and value < 0:
        raise ConfigError(path, "must be nonnegative")
    return value


def _object(doc: dict, key: str) -> dict:
    value = doc.get(key, {})
    if not isinstance(value, dict):
        raise ConfigError(key, "expected an object")
    return value


def _check_keys(obj: dict, allowed: set, prefix: str) -> None:
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"{prefix}{key}", "unknown field")


@dataclass
class ScenarioConfig:
    name: str
    parameters: Parameters
    initial: CompartmentState
    time_unit: str = "day"
    horizon: float = 59.0
    output_step: float = 1.0
    classifier_horizon: float = 1e6
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    schedule: Optional[BetaSchedule] = None
    geometry: Optional[dict] = None
    initial_field: dict = field(default_factory=lambda: {"kind": "uniform"})
    diffusion: DiffusionConfig = field(default_factory=DiffusionConfig)
    pde: Optional[PdeRunConfig] = None
    calibration: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict) -> ScenarioConfig:
        _check_keys(doc, _TOP_KEYS, "")
        params_doc = _object(doc, "parameters")
        if not params_doc:
            raise ConfigError("parameters", "required (or use a preset)")
        _check_keys(params_doc, set(Parameters.field_names()), "parameters.")
        missing = [n for n in Parameters.field_names() if n not in params_doc]
        if missing:
            raise ConfigError("parameters", f"missing fields {missing}")
        values = {k: _number(v, f"parameters.{k}") for k, v in params_doc.items()}
        try:
            params = Parameters(**values)
        except ModelError as exc:
            raise ConfigError("parameters", str(exc)) from None

        init_doc = _object(doc, "initial")
        _check_keys(init_doc, set(COMPARTMENTS), "initial.")
        try:
            initial = CompartmentState(*(_number(init_doc.get(c, 0.0), f"initial.{c}", nonneg=True) for c in COMPARTMENTS))
        except ModelError as exc:
            raise ConfigError("initial", str(exc)) from None
        if initial.n <= 0:
            raise ConfigError("initial", "total population must be positive")

        horizon = _number(doc.get("horizon", 59.0), "horizon", positive=True)
        out = cls(
            name=str(doc.get("name", "scenario")),
            parameters=params,
            initial=initial,
            time_unit=str(doc.get("time_unit", "day")),
            horizon=horizon,
            output_step=_number(doc.get("output_step", 1.0), "output_step", positive=True),
            classifier_horizon=_number(doc.get("classifier_horizon", 1e6), "classifier_horizon", positive=True),
        )

        integ = _object(doc, "integrator")
        _check_keys(integ, {"rel_tol", "abs_tol", "max_step"}, "integrator.")
        out.integrator = IntegratorConfig(**{k: _number(v, f"integrator.{k}", positive=True) for k, v in integ.items()})

        sched = doc.get("schedule")
        if sched is not None:
            if not isinstance(sched, dict):
                raise ConfigError("schedule", "expected an object or null")
            _check_keys(sched, {"beta0", "alpha", "b", "period"}, "schedule.")
            try:
                out.schedule = BetaSchedule(
                    beta0=_number(sched.get("beta0", params.beta), "schedule.beta0"),
                    alpha=_number(sched.get("alpha", 0.0), "schedule.alpha"),
                    b=_number(sched.get("b", 0.0), "schedule.b"),
                    period=_number(sched.get("period", 12.0), "schedule.period"),
                )
            except ModelError as exc:
                raise ConfigError("schedule", str(exc)) from None

        geo = doc.get("geometry")
        if geo is not None:
            if not isinstance(geo, dict) or "source" not in geo:
                raise ConfigError("geometry", "expected an object with a 'source'")
            _check_keys(geo, {"source", "nx", "shift"}, "geometry.")
            nx = geo.get("nx", 64)
            if isinstance(nx, bool) or not isinstance(nx, int) or nx < 8:
                raise ConfigError("geometry.nx", "must be an integer >= 8")
            out.geometry = {"source": str(geo["source"]), "nx": nx, "shift": tuple(geo.get("shift", (0.0, 0.0)))}

        init_field = _object(doc, "initial_field") or {"kind": "uniform"}
        _check_keys(init_field, {"kind", "peaks", "region", "localized"}, "initial_field.")
        kind = init_field.get("kind", "uniform")
        if kind not in ("uniform", "peaks", "region"):
            raise ConfigError("initial_field.kind", f"unknown kind {kind!r}")
        if kind == "peaks":
            peaks = init_field.get("peaks")
            if not isinstance(peaks, list) or not peaks:
                raise ConfigError("initial_field.peaks", "a non-empty list is required")
            for n, pk in enumerate(peaks):
                if not isinstance(pk, dict) or not {"x", "y"} <= set(pk):
                    raise ConfigError(f"initial_field.peaks[{n}]", "needs x and y")
                _check_keys(pk, {"x", "y", "width", "weight"}, f"initial_field.peaks[{n}].")
                for key, val in pk.items():
                    _number(val, f"initial_field.peaks[{n}].{key}", positive=key in ("width", "weight"))
        if kind == "region" and not isinstance(init_field.get("region"), str):
            raise ConfigError("initial_field.region", "a region name is required")
        out.initial_field = dict(init_field, kind=kind)

        diff = _object(doc, "diffusion")
        _check_keys(diff, {"kappa"}, "diffusion.")
        if "kappa" in diff:
            kappa = diff["kappa"]
            if not isinstance(kappa, list) or len(kappa) != 6:
                raise ConfigError("diffusion.kappa", "expected six numbers")
            out.diffusion = DiffusionConfig(tuple(_number(v, f"diffusion.kappa[{j}]", nonneg=True) for j, v in enumerate(kappa)))

        pde = doc.get("pde")
        if pde is not None:
            if not isinstance(pde, dict):
                raise ConfigError("pde", "expected an object")
            _check_keys(pde, {"dt", "snapshot_times", "linear_tol", "reaction"}, "pde.")
            snaps = pde.get("snapshot_times", [])
            if not isinstance(snaps, list):
                raise ConfigError("pde.snapshot_times", "expected a list")
            snaps = [_number(s, f"pde.snapshot_times[{j}]", nonneg=True) for j, s in enumerate(snaps)]
            if any(s > horizon for s in snaps):
                raise ConfigError("pde.snapshot_times", "snapshot after the horizon")
            tol = _number(pde.get("linear_tol", 1e-10), "pde.linear_tol", positive=True)
            if tol > 1e-4:
                raise ConfigError("pde.linear_tol", "must be at most 1e-4")
            reaction = pde.get("reaction", "rk4")
            if reaction not in ("rk4", "euler"):
                raise ConfigError("pde.reaction", "must be 'rk4' or 'euler'")
            out.pde = PdeRunConfig(
                t_end=horizon,
                dt=_number(pde.get("dt", 0.05), "pde.dt", positive=True),
                snapshot_times=tuple(snaps),
                linear_tol=tol,
                schedule=out.schedule,
                reaction=reaction,
                threads=_thread_count(),
            )

        calib = _object(doc, "calibration")
        _check_keys(calib, {"free", "bounds", "initial_guess", "method", "max_iter"}, "calibration.")
        free = calib.get("free", list(FREE_PARAMETERS))
        if not isinstance(free, list) or not all(isinstance(n, str) for n in free):
            raise ConfigError("calibration.free", "expected a list of parameter names")
        for n in free:
            if n not in Parameters.field_names():
                raise ConfigError("calibration.free", f"unknown parameter {n!r}")
        method = calib.get("method", "gauss-newton-damped")
        if method not in ("gauss-newton-damped", "simplex"):
            raise ConfigError("calibration.method", f"unknown method {method!r}")
        max_iter = calib.get("max_iter", 200)
        if isinstance(max_iter, bool) or not isinstance(max_iter, int) or max_iter < 1:
            raise ConfigError("calibration.max_iter", "must be a positive integer")
        bounds = _object(calib, "bounds")
        for n, b in bounds.items():
            if n not in free or not isinstance(b, list) or len(b) != 2:
                raise ConfigError(f"calibration.bounds.{n}", "expected [lower, upper] for a free parameter")
        guess = _object(calib, "initial_guess")
        for n in guess:
            if n not in free:
                raise ConfigError(f"calibration.initial_guess.{n}", "not a free parameter")
        out.calibration = {"free": tuple(free), "bounds": bounds, "initial_guess": guess, "method": method, "max_iter": max_iter}
        return out

    def output_times(self) -> np.ndarray:
        times = np.arange(0.0, self.horizon + 0.5 * self.output_step, self.output_step)
        times = times[times < self.horizon - 1e-9 * self.output_step]
        return np.append(times, self.horizon)


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get("EPIDIFF_THREADS", "1")))
    except ValueError:
        return 1


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _prepare_out(out: Optional[str]) -> Path:
    path = Path(out or ".")
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_simulate_ode(cfg: ScenarioConfig, out: Optional[str]) -> int:
    p = cfg.parameters
    traj = integrate(p, cfg.schedule, cfg.initial, 0.0, cfg.horizon, cfg.output_times(), cfg.integrator)
    verdict = long_run_classifier(p, cfg.initial, cfg.classifier_horizon, cfg.schedule, cfg.integrator)
    rc = control_reproduction_number(p)
    try:
        beta_crit = beta_critical(p)
    except ModelError:
        beta_crit = None
    summary = {
        "name": cfg.name,
        "time_unit": cfg.time_unit,
        "rc": rc,
        "beta_crit": beta_crit,
        "dfe": disease_free_equilibrium(p).to_dict(),
        "verdict": verdict,
        "classifier_horizon": cfg.classifier_horizon,
        "final_state": traj.state(len(traj) - 1).to_dict(),
        "final_cumulative_reported": float(traj.cum_reported[-1]),
    }
    dest = _prepare_out(out)
    traj.to_csv(dest / "trajectory.csv")
    _write_json(dest / "summary.json", summary)
    print(json.dumps({"rc": rc, "verdict": verdict}))
    return EXIT_OK


def cmd_calibrate(cfg: ScenarioConfig, data_path: Optional[str], out: Optional[str]) -> int:
    if data_path is None:
        raise ConfigError("--data", "a CSV with header t,cumulative_cases is required")
    try:
        data = ObservationSeries.from_csv(data_path)
    except (OSError, ValueError) as exc:
        raise ConfigError("--data", str(exc)) from None
    cal = cfg.calibration
    free = cal["free"]
    lower = tuple(cal["bounds"].get(n, DEFAULT_BOUNDS.get(n, (0.0, 10.0)))[0] for n in free)
    upper = tuple(cal["bounds"].get(n, DEFAULT_BOUNDS.get(n, (0.0, 10.0)))[1] for n in free)
    guess = tuple(cal["initial_guess"].get(n, getattr(cfg.parameters, n)) for n in free)
    try:
        spec = CalibrationSpec(
            cfg.parameters, cfg.initial, free, lower, upper, guess,
            c0=float(data.values[0]), t0=float(data.times[0]),
        )
    except ValueError as exc:
        raise ConfigError("calibration", str(exc)) from None
    result = fit(spec, data, method=cal["method"], max_iter=cal["max_iter"])
    report = result.to_dict(free)
    report["name"] = cfg.name
    dest = _prepare_out(out)
    _write_json(dest / "fit.json", report)
    model = predict(spec, result.theta, data.times)
    with open(dest / "fit_vs_data.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "cumulative_cases", "model"])
        for t, y, m in zip(data.times, data.values, model):
            w.writerow([repr(float(t)), repr(float(y)), repr(float(m))])
    print(json.dumps({"objective": report["objective"], "rc": report["rc"], "converged": report["converged"]}))
    return EXIT_OK


def cmd_equilibria(cfg: ScenarioConfig, out: Optional[str]) -> int:
    report = analyze(cfg.parameters).to_dict()
    text = json.dumps(report, indent=2, sort_keys=True)
    if out is not None:
        dest = _prepare_out(out)
        (dest / "equilibria.json").write_text(text + "\n")
    print(text)
    return EXIT_OK


def _resolve_geometry(source: str):
    path = Path(source)
    return load_polygons(path if path.is_file() else bundled_geometry(source))


def cmd_simulate_pde(cfg: ScenarioConfig, out: Optional[str]) -> int:
    if cfg.geometry is None:
        raise ConfigError("geometry", "required for simulate-pde")
    run = cfg.pde or PdeRunConfig(t_end=cfg.horizon, schedule=cfg.schedule, threads=_thread_count())
    poly = _resolve_geometry(cfg.geometry["source"])
    mask = rasterize(poly, cfg.geometry["nx"], shift=cfg.geometry["shift"])
    spec = cfg.initial_field
    peaks = [Peak(**pk) for pk in spec.get("peaks", [])]
    fld = initial_field(
        mask, spec["kind"], cfg.initial.as_array(), peaks=peaks,
        region=spec.get("region"), regions=poly.named_regions,
        localized=spec.get("localized", ("V", "E", "A", "I", "R")),
    )
    L = build_laplacian(mask)

    result = integrate_pde(fld, cfg.parameters, run, L, cfg.diffusion, mask=mask)
    times = cfg.output_times()
    ode = integrate(cfg.parameters, cfg.schedule, cfg.initial, 0.0, cfg.horizon, times, cfg.integrator)
    idx = np.array([int(np.argmin(np.abs(result.times - t))) for t in times])
    pde_totals = result.totals[idx]
    rel = np.abs(pde_totals - ode.states) / np.maximum(np.abs(ode.states), 1e-300)
    comparison = {
        "name": cfg.name,
        "time_unit": cfg.time_unit,
        "n_active_cells": mask.n_active,
        "h": mask.h,
        "times": times.tolist(),
        "pde_totals": {c: pde_totals[:, j].tolist() for j, c in enumerate(COMPARTMENTS)},
        "ode_totals": {c: ode.states[:, j].tolist() for j, c in enumerate(COMPARTMENTS)},
        "dfe": disease_free_equilibrium(cfg.parameters).to_dict(),
        "max_relative_difference": {c: float(rel[:, j].max()) for j, c in enumerate(COMPARTMENTS)},
        "rc": control_reproduction_number(cfg.parameters),
        "snapshot_ratios": {
            f"{t:g}": {c: float(f.compartment(c).max() / f.compartment(c).mean()) if f.compartment(c).mean() > 0 else None for c in "EAI"}
            for t, f in sorted(result.snapshots.items())
        },
    }
    if cfg.schedule is not None:
        sched = cfg.schedule
        rc_t = lambda t: instantaneous_rc(cfg.parameters, sched, t)  # noqa: E731
        comparison["instantaneous_rc"] = {f"{t:g}": float(rc_t(t)) for t in run.snapshot_times}
        comparison["beta_checkpoints"] = {
            f"{b:g}": [{"t": float(t), "rc": float(rc_t(t))} for t in level_crossings(sched, b, 0.0, cfg.horizon)]
            for b in OSCILLATION_CHECKPOINTS
        }
        comparison["rc_crossings"] = level_crossings(rc_t, 1.0, 0.0, cfg.horizon).tolist()

    dest = _prepare_out(out)
    result.totals_to_csv(dest / "totals.csv")
    ode.to_csv(dest / "ode_trajectory.csv")
    mask.to_pgm(dest / "mask.pgm")
    result.export_snapshots(dest / "snapshots")
    _write_json(dest / "comparison.json", comparison)
    print(json.dumps({"max_relative_difference": comparison["max_relative_difference"]}))
    return EXIT_OK


def cmd_dump_preset(name: Optional[str]) -> int:
    if name not in SCENARIOS:
        raise ConfigError("preset", f"unknown preset {name!r}; choose from {', '.join(sorted(SCENARIOS))}")
    print(json.dumps(SCENARIOS[name], indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="epidiff", description="SVEAIR epidemic model: ODE, PDE, equilibria and calibration.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, data=False, grid=False):
        sp.add_argument("--config", help="scenario preset name or JSON file")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="dotted-path override, repeatable")
        if data:
            sp.add_argument("--data", help="CSV with header t,cumulative_cases")
        if grid:
            sp.add_argument("--nx", type=int, help="grid columns")
            sp.add_argument("--dt", type=float, help="time step")

    common(sub.add_parser("simulate-ode", help="integrate the ODE model"))
    common(sub.add_parser("calibrate", help="fit free parameters to cumulative cases"), data=True)
    common(sub.add_parser("equilibria", help="R_c, equilibria and coefficient signs"))
    common(sub.add_parser("simulate-pde", help="run a spatial scenario"), grid=True)
    dump = sub.add_parser("dump-preset", help="print a built-in scenario")
    dump.add_argument("name", choices=sorted(SCENARIOS))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "dump-preset":
            return cmd_dump_preset(args.name)
        overrides = list(args.set)
        if getattr(args, "nx", None) is not None:
            overrides.append(f"geometry.nx={args.nx}")
        if getattr(args, "dt", None) is not None:
            overrides.append(f"pde.dt={args.dt}")
        cfg = ScenarioConfig.from_dict(load_config(args.config, overrides))
        if args.command == "simulate-ode":
            return cmd_simulate_ode(cfg, args.out)
        if args.command == "calibrate":
            return cmd_calibrate(cfg, args.data, args.out)
        if args.command == "equilibria":
            return cmd_equilibria(cfg, args.out)
        return cmd_simulate_pde(cfg, args.out)
    except (ConfigError, GeometryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ModelError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, ArithmeticError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
