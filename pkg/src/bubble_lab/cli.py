"""Command-line entry point: ``bubble-lab run`` and ``bubble-lab verify``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import criteria, functionals
from .config import ConfigError, ExperimentConfig, parse_config, parse_weight
from .field_solver import (
    Form,
    SolverPreconditionError,
    Spacetime,
    Trajectory,
    check_preconditions,
    check_residual,
    finite_speed_check,
    simulate,
)
from .verify import SUITES, kernel_suite

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PRECONDITION = 2
EXIT_DIVERGENCE = 3


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(path: Path, data: dict):
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def _fmt(v: float) -> str:
    return repr(float(v))


def write_trajectory_csv(path: Path, traj: Trajectory):
    coord = "x" if traj.geometry.value == "line" else "r"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", coord, "phi", "phi_t"])
        for k, t in enumerate(traj.times):
            ts = _fmt(t)
            for x, f, v in zip(traj.grid, traj.values[k], traj.velocities[k]):
                w.writerow([ts, _fmt(x), _fmt(f), _fmt(v)])


def write_moments_csv(path: Path, times, columns: dict[str, np.ndarray]):
    names = list(columns)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *names])
        for k, t in enumerate(times):
            w.writerow([_fmt(t), *(_fmt(columns[n][k]) for n in names)])


def _resolve_threads(arg: int | None) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("BUBBLE_LAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def _window_starts(cfg: ExperimentConfig, t_end: float) -> list[float]:
    starts = []
    for a in cfg.analyses:
        if a["type"] == "signedness":
            starts.append(a["window"][0] if a["window"] else 0.75 * t_end)
        elif a["type"] == "hypotheses":
            starts.append(min(a["neighborhood_delta"], t_end * (1 - a["terminal_fraction"])))
    return starts


def _run_analysis(a: dict, cfg: ExperimentConfig, traj: Trajectory | None, threads: int):
    kind = a["type"]
    if kind == "kernel_verify":
        return kernel_suite(threads)
    if kind == "lifespan":
        if a["mode"] == "kato":
            return criteria.kato_lifespan(a["p"], a["delta0"], a["weight_b"], a["F0"], a["Fdot0"],
                                          a["t0"]).to_dict()
        A = criteria.ExpPowDescriptor(**a["A"])
        g = criteria.ExpPowDescriptor(**a["gamma"])
        return criteria.odiexp_check(A, g, a["p"], a["c0"], tuple(a["window"])).to_dict()
    if kind == "moments":
        s = functionals.moments(traj, parse_weight(a["weight"]))
        return {"weight": s.weight_id, "F_final": float(s.F[-1]), "S_final": float(s.S[-1])}
    if kind == "energy":
        d = functionals.energy_dissipation(traj)
        return {"E_initial": float(d.E[0]), "E_final": float(d.E[-1]),
                "max_increase": float(np.max(np.diff(d.E))) if d.E.size > 1 else 0.0,
                "max_abs_dEdt_minus_rhs": float(np.max(np.abs(d.dE_dt - d.rhs)))
                if d.E.size > 1 else 0.0}
    if kind == "signedness":
        s = functionals.moments(traj, parse_weight(a["weight"]))
        window = tuple(a["window"]) if a["window"] else criteria.default_window(traj)
        return functionals.fit_signedness(s, a["sigma"], a["a"], a["b"], window).to_dict()
    if kind == "hypotheses":
        w = parse_weight(a["weight"])
        rep = criteria.check_hypotheses(traj, w, a["theorem_id"], a["sigma"],
                                        a["neighborhood_delta"], a["terminal_fraction"],
                                        a["M_eff_reading"], a["beta_reading"])
        out = rep.to_dict()
        if rep.overall == "hypotheses_met":
            d = criteria.dichotomy_outcome(traj, w, rep)
            out["outcome"] = {"bubble": d.bubble, "divergence": d.divergence,
                              "violation_all_weights": d.violation_all_weights, "fits": d.fits}
        return out
    if kind == "bubbles":
        ev = criteria.detect_bubbles(traj, a["threshold"])
        return {"n_events": len(ev), "times": [e.time for e in ev],
                "first": ev[0].to_dict() if ev else None, "last": ev[-1].to_dict() if ev else None}
    if kind == "finite_speed":
        r = finite_speed_check(traj)
        return {"pass": r.passed, "margin": r.margin}
    if kind == "residual":
        r = check_residual(traj)
        return {"order": r.order, "max": float(np.max(r.norms)), "times": r.times, "norms": r.norms}
    raise ConfigError(f"unknown analysis {kind}")


def _moment_columns(cfg: ExperimentConfig, traj: Trajectory) -> dict[str, np.ndarray]:
    cols: dict[str, np.ndarray] = {}
    weights = [a["weight"] for a in cfg.analyses if a["type"] == "moments"]
    if not weights:
        weights = [{"kind": "constant", "value": 1.0}]
    for i, wd in enumerate(weights):
        s = functionals.moments(traj, parse_weight(wd))
        suffix = "" if i == 0 else f"_w{i}"
        cols["F" + suffix] = s.F
        cols["S" + suffix] = s.S
    p = traj.params
    if any(a["type"] == "energy" for a in cfg.analyses) and (
        p.spacetime is Spacetime.DE_SITTER and p.form is Form.PHI
    ):
        cols["E"] = functionals.energy_series(traj)
    return cols


def _overall(results: list[dict], cfg: ExperimentConfig) -> str:
    verdicts = [r["overall"] for r, a in zip(results, cfg.analyses) if a["type"] == "hypotheses"]
    if not verdicts or all(v == "indeterminate" for v in verdicts):
        return "indeterminate"
    if all(v == "hypotheses_met" for v in verdicts):
        return "hypotheses_met"
    return "not_met" if "not_met" in verdicts else "indeterminate"


def run(config_path: str, out: str | None = None, threads: int | None = None) -> int:
    try:
        raw = json.loads(Path(config_path).read_text())
        cfg = parse_config(raw)
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    nthreads = _resolve_threads(threads)
    outdir = Path(out if out is not None else cfg.output)

    traj = None
    if cfg.model is not None:
        try:
            phi0, v0 = cfg.initial_fields()
            check_preconditions(cfg.model, phi0, v0, float(cfg.time["t_end"]),
                                float(cfg.time["dt"]))
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except (SolverPreconditionError, ValueError) as exc:
            print(f"precondition violated: {exc}", file=sys.stderr)
            return EXIT_PRECONDITION
        try:
            traj = simulate(cfg.model, (phi0, v0), float(cfg.time["t_end"]),
                            float(cfg.time["dt"]), int(cfg.time["save_every"]))
        except SolverPreconditionError as exc:
            print(f"precondition violated: {exc}", file=sys.stderr)
            return EXIT_PRECONDITION

    report = {"config": cfg.resolved(), "readings": _readings(cfg), "threads_affect_output": False}
    outdir.mkdir(parents=True, exist_ok=True)
    if traj is not None:
        report["simulation"] = {
            "n_slices": len(traj.times), "t_final": float(traj.times[-1]),
            "blowup": None if traj.blowup is None else
            {"time": traj.blowup[0], "reason": traj.blowup[1],
             "verdict": "numerical divergence past threshold"},
        }
        if traj.blowup is not None:
            starts = _window_starts(cfg, float(cfg.time["t_end"]))
            if starts and traj.blowup[0] < min(starts):
                report["overall"] = "divergence_before_analysis_window"
                write_json(outdir / "report.json", report)
                print(f"numerical divergence at t={traj.blowup[0]:.6g} before any analysis window",
                      file=sys.stderr)
                return EXIT_DIVERGENCE
        write_trajectory_csv(outdir / "trajectory.csv", traj)
        write_moments_csv(outdir / "moments.csv", traj.times, _moment_columns(cfg, traj))

    with ThreadPoolExecutor(max_workers=nthreads) as ex:
        results = list(ex.map(lambda a: _run_analysis(a, cfg, traj, 1), cfg.analyses))
    report["analyses"] = [{"type": a["type"], "result": r} for a, r in zip(cfg.analyses, results)]
    report["overall"] = _overall(results, cfg)
    write_json(outdir / "report.json", report)
    return EXIT_OK


def _readings(cfg: ExperimentConfig) -> dict:
    hyp = [a for a in cfg.analyses if a["type"] == "hypotheses"]
    kinks = [p["convention"] for p in cfg.initial.get("phi", []) if "convention" in p]
    return {
        "M_eff_reading": sorted({a["M_eff_reading"] for a in hyp}) or ["sqrt"],
        "beta_reading": sorted({a["beta_reading"] for a in hyp}) or ["1/p-1"],
        "kink_convention": sorted(set(kinks)) or ["resolved"],
    }


def verify(suite: str, out: str | None = None, threads: int | None = None) -> int:
    nthreads = _resolve_threads(threads)
    fn = SUITES[suite]
    result = fn(nthreads) if suite == "kernel" else fn()
    outdir = Path(out if out is not None else ".")
    outdir.mkdir(parents=True, exist_ok=True)
    write_json(outdir / "report.json", result)
    print(f"verify {suite}: {'pass' if result['pass'] else 'FAIL'}")
    return EXIT_OK if result["pass"] else 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="bubble-lab")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="simulate and analyse a JSON config")
    p_run.add_argument("config")
    p_run.add_argument("--out")
    p_run.add_argument("--threads", type=int)
    p_ver = sub.add_parser("verify", help="run a golden/oracle suite")
    p_ver.add_argument("suite", choices=sorted(SUITES))
    p_ver.add_argument("--out")
    p_ver.add_argument("--threads", type=int)
    args = parser.parse_args(argv)
    if args.command == "run":
        return run(args.config, args.out, args.threads)
    return verify(args.suite, args.out, args.threads)


if __name__ == "__main__":
    sys.exit(main())
