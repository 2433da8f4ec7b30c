"""Command-line front end: ``metric-knn-lab list`` and ``metric-knn-lab run <experiment>``.

Each run writes ``<outdir>/<experiment>-<seed>.csv`` and a manifest JSON with
the resolved configuration. Exit status: 0 on success, 1 on a configuration
error, 2 when an asserted bound is violated.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Callable

from . import __version__, _kernels
from .ball_geometry import koranyi_reimann_family
from .config import ConfigError, build_model, build_problem, config_digest, parse_grid, parse_number
from .experiments import (
    deviation_concentration,
    dgkl_bound_sweep,
    lb_differentiation_check,
    prop12_counterexample,
    schedule_by_name,
    strong_consistency_path,
    weak_consistency_run,
    whole_space,
)
from .experiments.parallel import resolve_threads
from .knn import TieBreakPolicy


@dataclass
class Outcome:
    rows: list
    violations: list = field(default_factory=list)
    report: dict | None = None


def _policy(cfg) -> TieBreakPolicy:
    try:
        return TieBreakPolicy(cfg["policy"])
    except ValueError:
        raise ConfigError(f"unknown policy {cfg['policy']!r}") from None


def _run_weak(cfg, seed, threads) -> Outcome:
    problem = build_problem(cfg["model"], cfg["eta"], seed)
    schedule = schedule_by_name(cfg["schedule"])
    n_grid = [int(n) for n in parse_grid(cfg["n_grid"])]
    rows = weak_consistency_run(problem, schedule, n_grid, int(cfg["test_size"]), int(cfg["trials"]), _policy(cfg), seed, threads)
    bad = [r["n"] for r in rows if r["mean_error"] + 3 * r["stderr"] < r["bayes_error"]]
    return Outcome(rows, [f"error below the Bayes error at n={n}" for n in bad])


def _run_strong(cfg, seed, threads) -> Outcome:
    problem = build_problem(cfg["model"], cfg["eta"], seed)
    schedule = schedule_by_name(cfg["schedule"])
    rows = strong_consistency_path(problem, schedule, int(cfg["n_max"]), _policy(cfg), seed, int(cfg["test_size"]), int(cfg["points"]))
    return Outcome(rows)


def _run_prop12(cfg, seed, threads) -> Outcome:
    try:
        rep = prop12_counterexample(parse_number(cfg["p"]), horizon=int(cfg["horizon"]), trials=int(cfg["trials"]), seed=seed, threads=threads)
    except RuntimeError as exc:
        return Outcome([], [str(exc)])
    return Outcome(rep.rows, rep.violations, rep.summary)


def _run_lb(cfg, seed, threads) -> Outcome:
    problem = build_problem(cfg["model"], cfg["eta"], seed)
    rows = lb_differentiation_check(problem, parse_grid(cfg["r_grid"]), float(cfg["epsilon"]), int(cfg["M"]), seed)
    return Outcome(rows)


def _run_dgkl(cfg, seed, threads) -> Outcome:
    model = build_model(cfg["model"], seed)
    rows = dgkl_bound_sweep(model, parse_grid(cfg["alphas"]), int(cfg["points"]), int(cfg["M"]), seed, cfg["method"], threads)
    bad = [r["alpha"] for r in rows if r["violations"]]
    return Outcome(rows, [f"D-measure above 4a(1 - ln a) + 3 sigma at alpha={a}" for a in bad])


def _run_concentration(cfg, seed, threads) -> Outcome:
    problem = build_problem(cfg["model"], cfg["eta"], seed)
    region = whole_space(problem.model)
    rows = deviation_concentration(
        problem,
        region,
        int(cfg["n"]),
        int(cfg["k"]),
        int(cfg["trials"]),
        float(cfg["beta"]),
        parse_grid(cfg["eps"]),
        int(cfg["M_eval"]),
        seed,
        _policy(cfg),
        threads,
    )
    bad = [r["eps"] for r in rows if not r["pass"]]
    return Outcome(rows, [f"empirical tail above the bound at eps={e}" for e in bad])


def _run_koranyi(cfg, seed, threads) -> Outcome:
    family, report = koranyi_reimann_family(int(cfg["N"]), parse_number(cfg["shrink"]))
    rows = []
    for b, row in zip(family.balls, report["balls"]):
        flat = {k: v for k, v in row.items() if k != "p"}
        flat.update(p_x=b.center[0], p_y=b.center[1], p_z=b.center[2])
        rows.append(flat)
    bad = []
    if not report["disconnected"]:
        bad.append("family is not disconnected")
    if report["multiplicity_at_origin"] != int(cfg["N"]):
        bad.append("origin is not in every ball")
    if any(v >= 0 for v in report["turning_imag"]):
        bad.append("turning condition fails")
    return Outcome(rows, bad, report)


@dataclass(frozen=True)
class Experiment:
    name: str
    description: str
    defaults: dict
    runner: Callable


EXPERIMENTS = [
    Experiment(
        "weak-consistency",
        "mean k-NN test error over seeded trials across sample sizes, next to the Bayes error",
        {"model": "concentric-gaussians", "eta": "posterior", "schedule": "sqrt", "n_grid": [250, 500, 1000, 2000, 4000], "test_size": 2000, "trials": 20, "policy": "by-index"},
        _run_weak,
    ),
    Experiment(
        "strong-path",
        "k-NN error along one growing labeled sample path",
        {"model": "uniform1", "eta": "coordinate", "schedule": "sqrt", "n_max": 10000, "test_size": 2000, "points": 20, "policy": "by-index"},
        _run_strong,
    ),
    Experiment(
        "prop12",
        "one-atom problem with random tie-breaking: certified bands, disjoint neighbor sets, wrong unanimous votes",
        {"p": math.exp(-1), "horizon": 30, "trials": 10000},
        _run_prop12,
    ),
    Experiment(
        "lb-check",
        "measure of points where the ball average of eta deviates from eta by more than epsilon",
        {"model": "uniform1", "eta": "coordinate", "r_grid": [0.2, 0.1, 0.05, 0.02, 0.01], "epsilon": 0.1, "M": 2000},
        _run_lb,
    ),
    Experiment(
        "dgkl-sweep",
        "measure of D(x, z, alpha) against 4 alpha (1 - ln alpha) over an alpha grid",
        {"model": "nested", "alphas": "2^-3..2^-10", "points": 20, "M": 100000, "method": "rank"},
        _run_dgkl,
    ),
    Experiment(
        "concentration",
        "tail of the conditional L1 error of eta_n against the exponential bound",
        {"model": "uniform1", "eta": "coordinate", "n": 2000, "k": 44, "trials": 200, "beta": 1, "eps": [0.1, 0.2, 0.3], "M_eval": 2000, "policy": "by-index"},
        _run_concentration,
    ),
    Experiment(
        "koranyi",
        "disconnected family of Heisenberg balls through the origin",
        {"N": 20, "shrink": 0.5},
        _run_koranyi,
    ),
]
BY_NAME = {e.name: e for e in EXPERIMENTS}

EXPERIMENT_FLAGS = (
    "model", "eta", "schedule", "n_grid", "test_size", "trials", "policy", "n_max", "points", "p", "horizon",
    "r_grid", "epsilon", "M", "alphas", "method", "n", "k", "beta", "eps", "M_eval", "N", "shrink",
)


def list_experiments() -> list[tuple[str, str]]:
    return [(e.name, e.description) for e in EXPERIMENTS]


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        cols = list(rows[0])
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in cols])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if hasattr(obj, "item"):
        return obj.item()
    return obj


def resolve_config(name: str, file_cfg: dict, flags: dict) -> dict:
    if name not in BY_NAME:
        raise ConfigError(f"unknown experiment {name!r}")
    cfg = copy.deepcopy(BY_NAME[name].defaults)
    unknown = set(file_cfg) - set(cfg) - {"experiment", "seed", "outdir", "threads"}
    if unknown:
        raise ConfigError(f"unknown config keys for {name}: {sorted(unknown)}")
    cfg.update({k: v for k, v in file_cfg.items() if k in cfg})
    for key, val in flags.items():
        if val is None:
            continue
        if key not in cfg:
            raise ConfigError(f"--{key.replace('_', '-')} does not apply to {name}")
        cfg[key] = val
    return cfg


def run(name: str, cfg: dict, seed: int, outdir: str, threads: int) -> int:
    os.makedirs(outdir, exist_ok=True)
    if not os.access(outdir, os.W_OK):
        raise OSError(f"output directory {outdir!r} is not writable")
    outcome = BY_NAME[name].runner(cfg, seed, threads)
    stem = os.path.join(outdir, f"{name}-{seed}")
    with open(stem + ".csv", "w", newline="") as fh:
        fh.write(rows_to_csv(outcome.rows))
    manifest = {
        "experiment": name,
        "seed": seed,
        "config": _jsonable(cfg),
        "config_sha256": config_digest({"experiment": name, "seed": seed, "config": _jsonable(cfg)}),
        "version": __version__,
        "kernel_backend": _kernels.BACKEND,
        "rows": len(outcome.rows),
        "violations": outcome.violations,
        "report": _jsonable(outcome.report),
    }
    with open(stem + ".manifest.json", "w") as fh:
        fh.write(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    for v in outcome.violations:
        print(f"violation: {v}", file=sys.stderr)
    return 2 if outcome.violations else 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="metric-knn-lab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("list", help="list experiments")
    r = sub.add_parser("run", help="run an experiment")
    r.add_argument("experiment")
    r.add_argument("--config", help="JSON config file")
    r.add_argument("--seed", help="master seed (required, unsigned 64-bit)")
    r.add_argument("--outdir", default=None)
    r.add_argument("--threads", type=int, default=None)
    for flag in EXPERIMENT_FLAGS:
        r.add_argument("--" + flag.replace("_", "-"), dest=flag, default=None)
    return ap


def _coerce(v):
    """Flag strings become JSON values when they parse as such."""
    if v is None:
        return None
    try:
        return json.loads(v)
    except (json.JSONDecodeError, TypeError):
        return v


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for name, desc in list_experiments():
            print(f"{name:18s} {desc}")
        return 0
    try:
        file_cfg = {}
        if args.config:
            with open(args.config) as fh:
                file_cfg = json.load(fh)
            if not isinstance(file_cfg, dict):
                raise ConfigError("config file must hold a JSON object")
        seed = args.seed if args.seed is not None else file_cfg.get("seed")
        if seed is None:
            raise ConfigError("a seed is required (--seed or \"seed\" in the config)")
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        name = args.experiment
        flags = {k: _coerce(getattr(args, k)) for k in EXPERIMENT_FLAGS}
        cfg = resolve_config(name, file_cfg, flags)
        outdir = args.outdir or file_cfg.get("outdir") or "."
        threads = resolve_threads(args.threads if args.threads is not None else file_cfg.get("threads"))
        return run(name, cfg, seed, outdir, threads)
    except (ConfigError, ValueError, OSError, KeyError) as exc:
        print(f"metric-knn-lab: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
