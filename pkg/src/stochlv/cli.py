"""Command-line experiment runner.

    stochlv <command> [--config FILE] [--seed N] [--threads K] [--out-dir DIR]
                      [--format csv|json] [--check]

Every command writes its data plus a ``manifest.json`` (config hash, seed,
library versions, timestamp) into the output directory.  Exit codes: 0
success, 2 configuration error, 3 numeric budget/resolution failure, 4 a
``--check`` acceptance test failed.
"""

from __future__ import annotations

import argparse
import csv
import copy
import hashlib
import json
import platform
import sys
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from . import classify3d, convergence, measures, turbulence
from .decomposition import phi_decomposed_trajectory, phi_pullback
from .errors import (BudgetError, ConfigError, DegenerateError, DivergenceError,
                     InsufficientDataError, LabError, ResolutionError, WindowError)
from .logistic import Calculus, LogisticParams, stationary_cdf, u_random_equilibrium, \
    default_truncation, stationary_moments
from .lv import LVSystem, integrate_ode, omega_limit_classify, simplex_project
from .paths import sample_path
from .presets import DESCRIPTIONS, PRESETS, preset
from .sde import euler_maruyama, milstein

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_CHECK = 0, 2, 3, 4

_matrix = {"type": "array", "items": {"type": "array", "items": {"type": "number"}},
           "minItems": 1}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_count = {"type": "integer", "minimum": 1}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "stochlv experiment configuration",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "system": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "preset": {"enum": sorted(PRESETS)},
                "n": _count,
                "r": _pos,
                "A": _matrix,
                "C": _matrix,
                "sigma": _nonneg,
                "calculus": {"enum": [c.value for c in Calculus]},
                "name": {"type": "string"},
            },
            "oneOf": [{"required": ["preset"], "not": {"anyOf": [
                          {"required": ["A"]}, {"required": ["C"]}, {"required": ["r"]}]}},
                      {"required": ["r", "A"], "not": {"anyOf": [
                          {"required": ["C"]}, {"required": ["preset"]}]}},
                      {"required": ["r", "C"], "not": {"anyOf": [
                          {"required": ["A"]}, {"required": ["preset"]}]}}],
        },
        "y0": {"type": "array", "items": _nonneg, "minItems": 1},
        "T": _pos,
        "step": _pos,
        "path_count": _count,
        "burn_in": _nonneg,
        "samples_per_path": _count,
        "replications": _count,
        "scheme": {"enum": ["ode", "euler", "milstein", "decomposition"]},
        "levels": {"type": "integer", "minimum": 2, "maximum": 8},
        "g0": _pos,
        "times": {"type": "array", "items": _pos, "minItems": 1},
        "seeds": _count,
        "sigmas": {"type": "array", "items": _pos, "minItems": 1},
        "target": {"enum": ["measure", "u"]},
        "horizon": _pos,
        "radius": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "budget": _count,
        "seed": {"type": "integer", "minimum": 0},
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"cone": _pos, "ray": _pos, "axes": _pos, "ks": _pos,
                           "pullback": _pos, "gap": _pos, "decomposition": _pos},
        },
    },
}

DEFAULTS = {
    "simulate": {"system": {"preset": "may-leonard-0.8-1.3", "sigma": 0.3},
                 "y0": [0.5, 0.3, 0.2], "T": 20.0, "step": 1e-3, "scheme": "milstein"},
    "decompose-check": {"system": {"preset": "may-leonard-0.8-1.3", "sigma": 0.3},
                        "y0": [0.5, 0.3, 0.2], "T": 5.0, "step": 1e-3, "levels": 3,
                        "scheme": "milstein"},
    "pullback": {"system": {"preset": "example-4.1", "sigma": 0.5}, "y0": [0.5, 0.3, 0.4],
                 "times": [50.0, 100.0, 200.0], "step": 1e-2, "seeds": 20},
    "stationary": {"system": {"preset": "example-4.1", "sigma": 0.5},
                   "y0": [0.5, 0.3, 0.4], "T": 200.0, "path_count": 100,
                   "samples_per_path": 100, "step": 1e-2, "target": "measure"},
    "sweep-sigma": {"system": {"preset": "example-4.1"}, "y0": [0.5, 0.3, 0.4],
                    "sigmas": [0.8, 0.4, 0.2], "T": 200.0, "path_count": 50,
                    "samples_per_path": 100, "step": 1e-2, "replications": 1},
    "classify": {"system": {"preset": "may-leonard-0.8-1.3"}, "budget": 1_000_000},
    "turbulence": {"system": {"preset": "may-leonard-0.8-1.3", "sigma": 0.05},
                   "y0": [0.5, 0.3, 0.2], "horizon": 9000.0, "path_count": 1000,
                   "radius": 0.5, "step": 2e-2},
}
DEFAULT_TOLERANCES = {"cone": 1e-3, "ray": 1e-3, "axes": 5e-2, "ks": 3e-2,
                      "pullback": 1e-3, "gap": 4e-2, "decomposition": 1e-2}


# ---------------------------------------------------------------------------
# configuration

def _field_of(err: jsonschema.ValidationError) -> str:
    path = [str(p) for p in err.absolute_path]
    if err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        path += extra[:1]
    elif err.validator == "required" and err.message.startswith("'"):
        path.append(err.message.split("'")[1])
    return ".".join(path) or "<root>"


def validate_config(cfg) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError("configuration must be a mapping", "<root>")
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        # report the deepest error: it names the actual field
        err = max(errors, key=lambda e: len(e.absolute_path))
        if err.context:
            err = max(err.context, key=lambda e: len(e.absolute_path))
        name = _field_of(err)
        raise ConfigError(f"invalid field '{name}': {err.message}", name)
    return cfg


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}", "--config") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}", "--config") from exc
    return validate_config({} if cfg is None else cfg)


def resolve_config(command: str, user: dict, seed: int | None) -> dict:
    cfg = copy.deepcopy(DEFAULTS.get(command, {}))
    for k, v in user.items():
        if k == "system" and "system" in cfg:
            cfg["system"] = copy.deepcopy(v)
        else:
            cfg[k] = copy.deepcopy(v)
    cfg.setdefault("seed", 0)
    if seed is not None:
        cfg["seed"] = seed
    cfg["tolerances"] = {**DEFAULT_TOLERANCES, **cfg.get("tolerances", {})}
    return validate_config(cfg)


def build_system(entry: dict) -> LVSystem:
    sigma = entry.get("sigma", 0.0)
    calculus = entry.get("calculus", Calculus.STRATONOVICH.value)
    if "preset" in entry:
        return preset(entry["preset"], sigma, calculus)
    key = "A" if "A" in entry else "C"
    M = np.asarray(entry[key], dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ConfigError(f"invalid field 'system.{key}': matrix must be square", f"system.{key}")
    if "n" in entry and entry["n"] != M.shape[0]:
        raise ConfigError("invalid field 'system.n': does not match the matrix size", "system.n")
    name = entry.get("name", "custom")
    if key == "C":
        return LVSystem.competitive(entry["r"], M, sigma, calculus, name)
    return LVSystem(entry["r"], M, sigma, calculus, name)


def _y0(cfg: dict, system: LVSystem) -> np.ndarray:
    y0 = np.asarray(cfg["y0"], dtype=float)
    if y0.shape != (system.n,):
        raise ConfigError(f"invalid field 'y0': need {system.n} entries", "y0")
    return y0


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _versions() -> dict:
    out = {"python": platform.python_version()}
    for dist in ("artifact", "numpy", "scipy", "numba", "jsonschema", "PyYAML"):
        try:
            out[dist] = metadata.version(dist)
        except metadata.PackageNotFoundError:
            out[dist] = None
    return out


# ---------------------------------------------------------------------------
# output

class Output:
    def __init__(self, out_dir: Path, fmt: str):
        self.dir = out_dir
        self.fmt = fmt
        self.files: list[str] = []
        try:
            self.dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {out_dir}: {exc}",
                              "--out-dir") from exc

    def _path(self, name: str) -> Path:
        self.files.append(name)
        return self.dir / name

    def table(self, name: str, rows: list[dict]) -> None:
        if self.fmt == "json":
            with open(self._path(f"{name}.json"), "w") as fh:
                json.dump(_plain(rows), fh, indent=2, sort_keys=True)
            return
        with open(self._path(f"{name}.csv"), "w", newline="") as fh:
            if not rows:
                return
            w = csv.writer(fh)
            cols = list(rows[0])
            w.writerow(cols)
            for row in rows:
                w.writerow([_cell(row[c]) for c in cols])

    def document(self, name: str, obj) -> None:
        with open(self._path(f"{name}.json"), "w") as fh:
            json.dump(_plain(obj), fh, indent=2, sort_keys=True)

    def manifest(self, command: str, cfg: dict, result: dict) -> None:
        doc = {"command": command, "config": cfg, "config_hash": config_hash(cfg),
               "seed": cfg.get("seed"), "versions": _versions(),
               "timestamp": datetime.now(timezone.utc).isoformat(),
               "files": sorted(self.files), "result": result}
        with open(self.dir / "manifest.json", "w") as fh:
            json.dump(_plain(doc), fh, indent=2, sort_keys=True)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return v


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


# ---------------------------------------------------------------------------
# commands; each returns (summary dict, check passed)

def cmd_simulate(cfg, out, threads):
    system = build_system(cfg["system"])
    y0 = _y0(cfg, system)
    T, step, scheme = cfg["T"], cfg["step"], cfg["scheme"]
    if scheme == "ode":
        tr = integrate_ode(system, y0, T, step)
    else:
        path = sample_path(cfg["seed"], 0.0, T, step)
        if scheme == "decomposition":
            tr = phi_decomposed_trajectory(system, path, y0, T, cfg.get("g0", 1.0))
        else:
            tr = (milstein if scheme == "milstein" else euler_maruyama)(system, path, y0, T)
    rows = [{"t": t, **{f"y{i + 1}": v for i, v in enumerate(y)}}
            for t, y in zip(tr.times, tr.states)]
    out.table("trajectory", rows)
    summary = {"scheme": scheme, "final": tr.states[-1], "clamps": tr.meta.get("clamps")}
    if system.n == 3 and np.all(tr.states > 0) and classify3d.theta_is_zero(system)[0]:
        try:
            V = classify3d.cone_params(system)(tr.states)
            summary["cone_invariant_drift"] = float(np.max(np.abs(V / V[0] - 1)))
        except DegenerateError:
            pass
    return summary, True


def cmd_decompose_check(cfg, out, threads):
    system = build_system(cfg["system"])
    y0 = _y0(cfg, system)
    path = sample_path(cfg["seed"], 0.0, cfg["T"], cfg["step"])
    study = convergence.decomposition_study(system, path, y0, cfg["T"], cfg["levels"],
                                            "euler" if cfg["scheme"] == "euler" else "milstein",
                                            cfg.get("g0", 1.0))
    out.table("decompose_check", study.rows())
    ok = bool(study.errors[0] < cfg["tolerances"]["decomposition"]) and study.within_band()
    return {"max_error": study.errors[0], "errors": study.errors, "ratios": study.ratios,
            "band": convergence.RATIO_BANDS[study.scheme]}, ok


def _deterministic_limit(system: LVSystem, y0) -> np.ndarray:
    om = omega_limit_classify(integrate_ode(system, y0, 400.0, 1e-2))
    if om.kind != "converges_to_equilibrium":
        raise InsufficientDataError(f"deterministic trajectory from y0 is {om.kind}")
    return om.point


def cmd_pullback(cfg, out, threads):
    system = build_system(cfg["system"])
    y0 = _y0(cfg, system)
    times = sorted(cfg["times"])
    P = _deterministic_limit(system, y0)
    horizon = max(times[-1], default_truncation(system.logistic))
    rows = []
    for s in range(cfg["seeds"]):
        seed = measures.path_seed(cfg["seed"], s)
        path = sample_path(seed, -np.ceil(horizon), 0.0, cfg["step"])
        u = u_random_equilibrium(system.logistic, path, truncation=times[-1])
        for t in times:
            d = float(np.linalg.norm(phi_pullback(system, path, y0, t) - u.value * P))
            rows.append({"path": s, "t": t, "u": u.value, "distance": d})
    out.table("pullback", rows)
    last = [r["distance"] for r in rows if r["t"] == times[-1]]
    return {"P": P, "max_distance_at_last_t": max(last)}, max(last) < cfg["tolerances"]["pullback"]


def cmd_stationary(cfg, out, threads):
    system = build_system(cfg["system"])
    tol = cfg["tolerances"]
    if cfg["target"] == "u":
        params = system.logistic
        T = default_truncation(params)
        reps = cfg.get("replications", 1)
        samples = [np.array([u_random_equilibrium(params, sample_path(
            measures.path_seed(cfg["seed"] + k, i), -np.ceil(T), 0.0, cfg["step"])).value
            for i in range(cfg["path_count"])]) for k in range(reps)]
        out.table("u_samples", [{"replication": k, "u": v}
                                for k, us in enumerate(samples) for v in us])
        ks = [measures.ks_distance(us, lambda x: stationary_cdf(params, x)) for us in samples]
        med = float(np.median(ks))
        mean, var = samples[0].mean(), samples[0].var(ddof=1)
        m_ref, v_ref = stationary_moments(params)
        # moment bands: 3% on the mean, 10% on the variance
        ok = med < tol["ks"] and abs(mean / m_ref - 1) <= 0.03 and abs(var / v_ref - 1) <= 0.1
        return {"mean": mean, "var": var, "reference_moments": [m_ref, v_ref], "ks": ks,
                "median_ks": med}, ok
    y0 = _y0(cfg, system)
    # the deterministic omega-limit decides the reference geometry
    om = omega_limit_classify(integrate_ode(system.with_sigma(0.0), y0, 400.0, 1e-2,
                                            log_coords=True))
    P = om.point if om.kind == "converges_to_equilibrium" and np.any(om.point > 0) else None
    m = measures.empirical_time_average(system, y0, cfg["T"], cfg["path_count"],
                                        cfg.get("burn_in"), cfg["samples_per_path"],
                                        cfg["step"], cfg["seed"], threads=threads,
                                        log_coords=om.kind == "heteroclinic_like")
    if out.fmt == "json":
        out.document("measure", m.summary())
    else:
        m.to_csv(out._path("measure.csv"))
    summary = {"mean": m.mean(), "omega_limit": om.kind}
    ok = True
    diag = measures.support_diagnostics(m, {"axes": True, "boundary-planes": True},
                                        tol["axes"])
    if P is not None:
        diag.update(measures.support_diagnostics(m, {"ray": P}, tol["ray"]))
        lam = measures.radial_coordinate(P, m.samples)
        summary["radial_ks"] = measures.ks_distance(
            lam, lambda x: stationary_cdf(system.logistic, x))
        ok = diag["ray"] > 0.99 and summary["radial_ks"] < tol["ks"]
    elif om.kind == "periodic":
        orbit = measures.PeriodicOrbit.from_system(system.with_sigma(0.0), y0)
        diag.update(measures.support_diagnostics(m, {"cone": orbit.states}, tol["cone"]))
        summary["phase_ks"] = measures.phase_ks(orbit, m)
        ok = diag["cone"] > 0.99
    summary["support"] = diag
    return summary, ok


def cmd_sweep_sigma(cfg, out, threads):
    system = build_system(cfg["system"])
    y0 = _y0(cfg, system)
    om = omega_limit_classify(integrate_ode(system.with_sigma(0.0), y0, max(cfg["T"], 200.0),
                                            1e-2))
    anchor = orbit = None
    if om.kind == "converges_to_equilibrium":
        anchor = om.point
    elif om.kind == "periodic":
        orbit = measures.PeriodicOrbit.from_system(system.with_sigma(0.0), y0)
    reps = [measures.sigma_sweep(system, y0, cfg["sigmas"], cfg["T"], cfg["path_count"],
                                 cfg["samples_per_path"], seed_base=cfg["seed"] + k,
                                 step=cfg["step"], anchor=anchor, orbit=orbit, threads=threads)
            for k in range(cfg["replications"])]
    table = []
    for k, rows in enumerate(reps):
        for r in rows:
            d = {"replication": k, **r.as_dict()}
            mean = d.pop("mean")
            d.update({f"mean{i + 1}": v for i, v in enumerate(mean)})
            table.append(d)
    out.table("sweep_sigma", table)
    # trends are judged on medians over replications
    key = "ball_mass" if anchor is not None else "phase_ks"
    medians = np.median([[getattr(r, key) for r in rows] for rows in reps], axis=0)
    if anchor is not None:
        ok = bool(np.all(np.diff(medians) >= 0))
    else:
        ok = bool(np.all(np.diff(medians) < 0))
    return {"sigmas": cfg["sigmas"], f"median_{key}": medians,
            "replications": cfg["replications"]}, ok


def cmd_classify(cfg, out, threads):
    system = build_system(cfg["system"])
    report = classify3d.classify(system, budget=cfg["budget"])
    out.document("classification", report.to_dict())
    if report.budget_exhausted:
        raise BudgetError(f"simulation budget of {cfg['budget']} steps exhausted "
                          "(partial report written)")
    return {"category": report.category, "theta": report.theta}, \
        report.category != "mixed/unknown"


def cmd_turbulence(cfg, out, threads):
    system = build_system(cfg["system"])
    y0 = _y0(cfg, system)
    res = turbulence.nonunique_time_averages(system, y0, cfg["path_count"], cfg["horizon"],
                                             radius=cfg["radius"], path_step=cfg["step"],
                                             seed_base=cfg["seed"])
    if out.fmt == "json":
        out.document("turbulence", {"summary": res.summary(), "rows": {
            "n": res.n, "T_in": res.t_in, "T_out": res.t_out, "fraction": res.fraction,
            "avg_at_Tout": res.det_avg_T, "avg_at_Sout": res.det_avg_S}})
    else:
        res.to_csv(out._path("turbulence.csv"))
        out.document("turbulence_summary", res.summary())
    summary = res.summary()
    ok = all(summary.get(k, {}).get("gap", -1.0) >= cfg["tolerances"]["gap"]
             for k in (("deterministic", "stochastic") if system.sigma > 0 and
                       cfg["path_count"] else ("deterministic",)))
    return summary, ok


COMMANDS = {
    "simulate": (cmd_simulate, "SDE/ODE trajectory"),
    "decompose-check": (cmd_decompose_check, "decomposition formula vs direct SDE scheme"),
    "pullback": (cmd_pullback, "pull-back convergence to u(omega) P"),
    "stationary": (cmd_stationary, "stationary measure estimate, KS and support masses"),
    "sweep-sigma": (cmd_sweep_sigma, "time-average measures across decreasing sigma"),
    "classify": (cmd_classify, "3D competitive classification report"),
    "turbulence": (cmd_turbulence, "dwell times and nonunique time averages"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stochlv", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="YAML or JSON experiment configuration")
        p.add_argument("--seed", type=int, help="seed base (overrides the config)")
        p.add_argument("--threads", type=int, default=1, help="worker threads across paths")
        p.add_argument("--out-dir", default="stochlv-out", help="output directory")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--check", action="store_true",
                       help="evaluate the acceptance check; exit 4 on failure")
    ex = sub.add_parser("examples", help="built-in presets")
    ex.add_argument("--list", action="store_true", help="list preset names")
    ex.add_argument("name", nargs="?", help="show one preset")
    sub.add_parser("schema", help="print the configuration JSON schema")
    return parser


def _examples(args) -> int:
    if args.name is None or args.list:
        for name in PRESETS:
            print(f"{name}\t{DESCRIPTIONS[name]}")
        return EXIT_OK
    try:
        s = preset(args.name)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps({"name": s.name, "r": s.r, "A": s.A.tolist(),
                      "description": DESCRIPTIONS[args.name]}, indent=2))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "examples":
        return _examples(args)
    if args.command == "schema":
        print(json.dumps(CONFIG_SCHEMA, indent=2))
        return EXIT_OK
    try:
        if args.seed is not None and args.seed < 0:
            raise ConfigError("invalid field 'seed': must be nonnegative", "seed")
        if args.threads < 1:
            raise ConfigError("invalid field 'threads': must be positive", "threads")
        cfg = resolve_config(args.command, load_config(args.config), args.seed)
        out = Output(Path(args.out_dir), args.format)
        run, _ = COMMANDS[args.command]
        summary, ok = run(cfg, out, args.threads)
        out.manifest(args.command, cfg, {"summary": summary, "check": ok if args.check else None})
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BudgetError, DivergenceError, ResolutionError, InsufficientDataError,
            WindowError, DegenerateError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (LabError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(_plain({"command": args.command, "summary": summary}), indent=2,
                     sort_keys=True))
    if args.check and not ok:
        print("check failed", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
