"""Experiment engine: paired multi-seed runs, first-step improvement
reports, the published-benchmark comparison suite, the quasi-Newton
comparison suite, and deterministic CSV/JSON serialization.

All randomness is seed-derived; identical inputs produce byte-identical
files (floats are written with 17 significant digits).
"""
from __future__ import annotations

import json
import math
import os
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .core import InputError, LambdaSchedule
from .functions import TestFunction, lookup, registry, sample_x0
from .optimizers import OptimizerConfig, Trace, run

__all__ = [
    "ExperimentSpec",
    "RunOutcome",
    "ExperimentResult",
    "run_experiment",
    "table1_suite",
    "qn_suite",
    "first_step_improvement",
    "trace_rows",
    "rows_to_csv",
    "write_text_atomic",
    "write_experiment_files",
    "write_table1_files",
    "write_qn_suite_files",
    "CSV_HEADER",
    "PUBLISHED_IMPROVEMENTS",
    "QN_SUITE_FUNCTIONS",
    "QN_SUITE_METHODS",
    "DOMINANCE_SEED_THRESHOLD",
]

THREADS_ENV = "CGD_OPT_THREADS"

CSV_HEADER = "k,grad_evals,f_minus_fstar,grad_norm,direction,lambda"

# Reference first-step improvements (in %) reported for the published
# benchmark hyperparameters. Initial points behind these numbers are not
# public, so they are reported alongside measurements, never asserted.
PUBLISHED_IMPROVEMENTS = {
    "quadratic": {"gd": 18.89, "cgd-fd": 97.91},
    "rotated-hyper-ellipsoid": {"gd": 15.94, "cgd-fd": 82.76},
    "levy": {"gd": 23.73, "cgd-fd": 63.21},
    "branin": {"gd": 37.53, "cgd-fd": 87.07},
    "griewank": {"gd": 0.01, "cgd-fd": 0.08},
    "matyas": {"gd": 1.83, "cgd-fd": 34.40},
}

# Fraction of seeds on which cgd-fd must beat gd for a row to count as
# dominant. Harness policy, not a published claim.
DOMINANCE_SEED_THRESHOLD = 0.8

QN_SUITE_METHODS = ("dfp", "bfgs", "cgd-dfp", "cgd-bfgs")

# Hyperparameters for the quasi-Newton comparison suite. Only the budget
# T=40 is published for these runs; the step sizes and penalties below were
# calibrated on seeded ensembles and validated on held-out seeds. The
# penalty must keep 2*lam*||G~|| around O(1): the running Hessian
# approximation reaches the true curvature scale (~1e3 for zakharov), so
# useful penalties are far smaller than in the first-order benchmark rows.
QN_SUITE_FUNCTIONS: dict[str, dict] = {
    "zakharov": {"alpha": 1e-3, "lambda_start": 0.005, "lambda_end": None},
    "drop-wave": {"alpha": 0.02, "lambda_start": 0.01, "lambda_end": None},
    "eggholder": {"alpha": 2.0, "lambda_start": 0.1, "lambda_end": 2.0},
}


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment: a function, per-optimizer configs, and seeds.

    Every optimizer starts from the identical x0 for a given seed, so the
    comparison is paired. `x0_override` replaces the seeded sample for all
    runs when given.
    """

    function: str
    configs: Mapping[str, OptimizerConfig]
    seeds: tuple[int, ...]
    x0_override: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.configs:
            raise InputError("experiment needs at least one optimizer")
        if not self.seeds:
            raise InputError("experiment needs at least one seed")


@dataclass
class RunOutcome:
    optimizer: str
    seed: int
    x0: np.ndarray
    trace: Trace
    improvement1: float
    monotone: bool

    @property
    def failed(self) -> bool:
        return self.trace.terminated_by == "nonfinite"


@dataclass
class ExperimentResult:
    function: TestFunction
    spec: ExperimentSpec
    outcomes: list[RunOutcome]
    summary: dict


def first_step_improvement(trace: Trace) -> float:
    """(f(x0) - f(x1)) / f(x0) * 100 over the first step only.

    NaN when the trace has no step or f(x0) = 0. Sign is only meaningful
    for objectives that are positive at x0.
    """
    if not trace.records:
        return float("nan")
    f0 = trace.records[0].f
    f1 = trace.records[1].f if len(trace.records) > 1 else trace.final_f
    if f0 == 0 or not math.isfinite(f0):
        return float("nan")
    return (f0 - f1) / f0 * 100.0


def _is_monotone(trace: Trace) -> bool:
    fs = trace.f_values()
    return all(b <= a for a, b in zip(fs, fs[1:]) if math.isfinite(a) and math.isfinite(b))


def _max_threads(n_jobs: int) -> int:
    cap = os.environ.get(THREADS_ENV)
    limit = os.cpu_count() or 1
    if cap is not None:
        try:
            limit = max(1, int(cap))
        except ValueError:
            raise InputError(f"{THREADS_ENV} must be an integer, got {cap!r}")
    return max(1, min(limit, n_jobs))


def _schedule_dict(s: LambdaSchedule) -> dict:
    return {"kind": s.kind, "start": s.start, "end": s.end, "length": s.length}


def _config_dict(cfg: OptimizerConfig) -> dict:
    """Config with every default materialized, for reproducible summaries."""
    return {
        "method": cfg.method,
        "alpha": cfg.alpha,
        "lambda": _schedule_dict(cfg.lam),
        "iters": cfg.iters,
        "threshold": cfg.b,
        "fd_step": cfg.fd_step,
        "grad_tol": cfg.grad_tol,
    }


def _published_reference(fn: TestFunction, configs: Mapping[str, OptimizerConfig]) -> dict | None:
    """Reference improvements, attached only when the run matches the
    published hyperparameters for this function."""
    if fn.table1 is None or fn.name not in PUBLISHED_IMPROVEMENTS:
        return None
    t = fn.table1
    for cfg in configs.values():
        if cfg.iters != 40 or cfg.b != 10:
            return None
        if cfg.alpha != t.alpha:
            return None
        if cfg.method != "gd":
            lam = cfg.lam
            if t.lambda_end is None:
                if not (lam.kind == "constant" and lam.start == t.lambda_start):
                    return None
            else:
                if not (
                    lam.kind == "linear"
                    and lam.start == t.lambda_start
                    and lam.end == t.lambda_end
                ):
                    return None
    return dict(PUBLISHED_IMPROVEMENTS[fn.name])


def _aggregate(values: list[float]) -> dict:
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return {"mean": None, "median": None, "count": 0}
    return {
        "mean": statistics.fmean(finite),
        "median": statistics.median(finite),
        "count": len(finite),
    }


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    """Execute every (optimizer, seed) pair and assemble the summary.

    Runs are independent and may execute on a thread pool capped by the
    CGD_OPT_THREADS environment variable; the summary is assembled
    single-threaded afterwards, so results are deterministic either way.
    """
    fn = lookup(spec.function)
    for name, cfg in spec.configs.items():
        if name != cfg.method:
            raise InputError(f"config key {name!r} does not match its method {cfg.method!r}")
        if cfg.method == "cgd" and not fn.objective.has_hessian:
            raise InputError(f"{fn.name} has no analytic Hessian; cgd is unavailable, use cgd-fd")
    if spec.x0_override is not None:
        x0_base = np.asarray(spec.x0_override, dtype=float)
        if x0_base.shape != (fn.dim,):
            raise InputError(f"x0 override must have length {fn.dim}")
        x0s = {seed: x0_base for seed in spec.seeds}
    else:
        x0s = {seed: sample_x0(fn, seed) for seed in spec.seeds}

    jobs = [(opt, cfg, seed) for opt, cfg in spec.configs.items() for seed in spec.seeds]

    def execute(job) -> tuple[tuple[str, int], RunOutcome]:
        opt, cfg, seed = job
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            trace = run(fn.objective, cfg, x0s[seed])
        outcome = RunOutcome(
            optimizer=opt,
            seed=seed,
            x0=x0s[seed],
            trace=trace,
            improvement1=first_step_improvement(trace),
            monotone=_is_monotone(trace),
        )
        return (opt, seed), outcome

    threads = _max_threads(len(jobs))
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            collected = dict(pool.map(execute, jobs))
    else:
        collected = dict(map(execute, jobs))
    outcomes = [collected[(opt, seed)] for opt in spec.configs for seed in spec.seeds]

    f_star = fn.f_star
    runs = [
        {
            "optimizer": o.optimizer,
            "seed": o.seed,
            "improvement1": o.improvement1,
            "final_f": o.trace.final_f,
            "final_f_minus_fstar": o.trace.final_f - f_star,
            "grad_evals": o.trace.grad_evals,
            "terminated_by": o.trace.terminated_by,
            "monotone": o.monotone,
            "failed": o.failed,
        }
        for o in outcomes
    ]
    improvement = {
        opt: _aggregate([o.improvement1 for o in outcomes if o.optimizer == opt])
        for opt in spec.configs
    }
    summary = {
        "function": fn.name,
        "dim": fn.dim,
        "f_star": f_star,
        "seeds": list(spec.seeds),
        "x0_override": list(spec.x0_override) if spec.x0_override is not None else None,
        "configs": {opt: _config_dict(cfg) for opt, cfg in spec.configs.items()},
        "runs": runs,
        "improvement": improvement,
        "published_reference": _published_reference(fn, spec.configs),
        "numeric_failures": sum(1 for o in outcomes if o.failed),
        "policy": {
            "improvement_definition": "(f(x0)-f(x1))/f(x0)*100, first post-x0 iterate only",
            "pairing": "all optimizers share the seeded x0",
        },
    }
    return ExperimentResult(function=fn, spec=spec, outcomes=outcomes, summary=summary)


def _benchmark_configs(fn: TestFunction, iters: int = 40, threshold: int = 10, fd_step: float = 0.01):
    assert fn.table1 is not None
    sched = fn.table1.schedule(iters)
    return {
        "gd": OptimizerConfig(method="gd", alpha=fn.table1.alpha, iters=iters),
        "cgd-fd": OptimizerConfig(
            method="cgd-fd",
            alpha=fn.table1.alpha,
            lam=sched,
            iters=iters,
            threshold=threshold,
            fd_step=fd_step,
        ),
    }


def table1_suite(seeds: Iterable[int]) -> dict:
    """Run every published-hyperparameter benchmark row (gd vs cgd-fd,
    T=40, b=10) over the given seeds and report first-step improvements,
    per-seed dominance, and the published reference values."""
    seeds = tuple(seeds)
    rows = []
    for fn in registry():
        if fn.table1 is None:
            continue
        spec = ExperimentSpec(function=fn.name, configs=_benchmark_configs(fn), seeds=seeds)
        result = run_experiment(spec)
        by_opt = {
            opt: {o.seed: o.improvement1 for o in result.outcomes if o.optimizer == opt}
            for opt in ("gd", "cgd-fd")
        }
        wins = sum(
            1 for seed in seeds if by_opt["cgd-fd"][seed] > by_opt["gd"][seed]
        )
        agg = result.summary["improvement"]
        rows.append(
            {
                "function": fn.name,
                "dim": fn.dim,
                "lambda": fn.table1.label(),
                "alpha": fn.table1.alpha,
                "gd": agg["gd"],
                "cgd-fd": agg["cgd-fd"],
                "dominance_fraction": wins / len(seeds),
                "mean_dominance": agg["cgd-fd"]["mean"] > agg["gd"]["mean"],
                "published_reference": result.summary["published_reference"],
                "numeric_failures": result.summary["numeric_failures"],
            }
        )
    return {
        "suite": "table1",
        "seeds": list(seeds),
        "iters": 40,
        "threshold": 10,
        "fd_step": 0.01,
        "rows": rows,
        "policy": {
            "dominance_seed_threshold": DOMINANCE_SEED_THRESHOLD,
            "note": "per-seed dominance threshold is a harness policy, not a published claim",
        },
    }


def _qn_configs(params: dict, iters: int = 40) -> dict[str, OptimizerConfig]:
    if params["lambda_end"] is None:
        sched = LambdaSchedule.constant(params["lambda_start"])
    else:
        sched = LambdaSchedule.linear(params["lambda_start"], params["lambda_end"], iters)
    alpha = params["alpha"]
    return {
        "dfp": OptimizerConfig(method="dfp", alpha=alpha, iters=iters),
        "bfgs": OptimizerConfig(method="bfgs", alpha=alpha, iters=iters),
        "cgd-dfp": OptimizerConfig(method="cgd-dfp", alpha=alpha, lam=sched, iters=iters),
        "cgd-bfgs": OptimizerConfig(method="cgd-bfgs", alpha=alpha, lam=sched, iters=iters),
    }


def qn_suite(seeds: Iterable[int], iters: int = 40) -> dict:
    """Quasi-Newton comparison: vanilla dfp/bfgs against their penalized
    variants on the three Hessian-free benchmark functions. Emits per-k
    median trajectories (f - f*, `iters` points per optimizer) and
    final-value statistics; the dfp/bfgs trajectory gap of the penalized
    variants is reported, not asserted."""
    seeds = tuple(seeds)
    functions = {}
    for name, params in QN_SUITE_FUNCTIONS.items():
        fn = lookup(name)
        configs = _qn_configs(params, iters)
        spec = ExperimentSpec(function=name, configs=configs, seeds=seeds)
        result = run_experiment(spec)
        f_star = fn.f_star
        per_opt_f: dict[str, list[list[float]]] = {opt: [] for opt in QN_SUITE_METHODS}
        for o in result.outcomes:
            fs = [r.f - f_star for r in o.trace.records][:iters]
            if fs:
                fs += [fs[-1]] * (iters - len(fs))  # pad truncated runs flat
            else:
                fs = [float("nan")] * iters
            per_opt_f[o.optimizer].append(fs)
        series = {
            opt: [float(np.median([fs[k] for fs in runs])) for k in range(iters)]
            for opt, runs in per_opt_f.items()
        }
        final = {
            opt: _aggregate(
                [o.trace.final_f for o in result.outcomes if o.optimizer == opt]
            )
            for opt in QN_SUITE_METHODS
        }
        gaps = []
        for seed in seeds:
            fd = next(o for o in result.outcomes if o.optimizer == "cgd-dfp" and o.seed == seed)
            fb = next(o for o in result.outcomes if o.optimizer == "cgd-bfgs" and o.seed == seed)
            n = min(len(fd.trace.records), len(fb.trace.records))
            if n:
                gaps.append(
                    max(abs(fd.trace.records[k].f - fb.trace.records[k].f) for k in range(n))
                )
        functions[name] = {
            "config": {opt: _config_dict(cfg) for opt, cfg in configs.items()},
            "f_star": f_star,
            "series": series,
            "final": final,
            "variant_trajectory_gap_median": float(np.median(gaps)) if gaps else None,
            "numeric_failures": result.summary["numeric_failures"],
        }
    return {
        "suite": "qn",
        "seeds": list(seeds),
        "iters": iters,
        "functions": functions,
    }


# ---------------------------------------------------------------------------
# serialization

def _fmt(v) -> str:
    return "%.17g" % float(v)


def trace_rows(trace: Trace, f_star: float) -> list[dict]:
    """Plot-ready rows, one per recorded iterate."""
    return [
        {
            "k": r.k,
            "grad_evals": r.cumulative_grad_evals,
            "f_minus_fstar": r.f - f_star,
            "grad_norm": r.grad_norm,
            "direction": r.direction_kind,
            "lambda": r.lambda_k,
        }
        for r in trace.records
    ]


def rows_to_csv(rows: list[dict]) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(
            ",".join(
                (
                    str(int(r["k"])),
                    str(int(r["grad_evals"])),
                    _fmt(r["f_minus_fstar"]),
                    _fmt(r["grad_norm"]),
                    str(r["direction"]),
                    _fmt(r["lambda"]),
                )
            )
        )
    return "\n".join(lines) + "\n"


def write_text_atomic(path: Path, text: str) -> None:
    """Write via a temp file and rename, so readers never see partial files."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _dump_json(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_experiment_files(payload: dict, out_dir: Path, fmt: str = "csv") -> list[Path]:
    """Persist a run payload (as returned by the service): one trace file
    per (optimizer, seed) plus summary.json. Returns the paths written."""
    if fmt not in ("csv", "json"):
        raise InputError(f"unknown output format {fmt!r}")
    out_dir = Path(out_dir)
    function = payload["summary"]["function"]
    paths = []
    for trace in payload["traces"]:
        stem = f"{function}_{trace['optimizer']}_seed{trace['seed']}"
        if fmt == "csv":
            path = out_dir / f"{stem}.csv"
            write_text_atomic(path, rows_to_csv(trace["rows"]))
        else:
            path = out_dir / f"{stem}.json"
            write_text_atomic(path, _dump_json(trace))
        paths.append(path)
    summary_path = out_dir / "summary.json"
    write_text_atomic(summary_path, _dump_json(payload["summary"]))
    paths.append(summary_path)
    return paths


def write_table1_files(summary: dict, out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    json_path = out_dir / "table1_summary.json"
    write_text_atomic(json_path, _dump_json(summary))
    lines = ["function,n,lambda,alpha,gd_mean,cgd_fd_mean,gd_reference,cgd_fd_reference,dominance_fraction"]
    for row in summary["rows"]:
        ref = row.get("published_reference") or {}
        lines.append(
            ",".join(
                (
                    row["function"],
                    str(row["dim"]),
                    '"%s"' % row["lambda"],
                    _fmt(row["alpha"]),
                    _fmt(row["gd"]["mean"]),
                    _fmt(row["cgd-fd"]["mean"]),
                    _fmt(ref.get("gd", float("nan"))),
                    _fmt(ref.get("cgd-fd", float("nan"))),
                    _fmt(row["dominance_fraction"]),
                )
            )
        )
    csv_path = out_dir / "table1_summary.csv"
    write_text_atomic(csv_path, "\n".join(lines) + "\n")
    return [json_path, csv_path]


def write_qn_suite_files(result: dict, out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    paths = []
    for name, data in result["functions"].items():
        lines = ["k," + ",".join(QN_SUITE_METHODS)]
        for k in range(result["iters"]):
            lines.append(
                str(k) + "," + ",".join(_fmt(data["series"][opt][k]) for opt in QN_SUITE_METHODS)
            )
        path = out_dir / f"qn_{name}.csv"
        write_text_atomic(path, "\n".join(lines) + "\n")
        paths.append(path)
    summary_path = out_dir / "qn_summary.json"
    write_text_atomic(summary_path, _dump_json(result))
    paths.append(summary_path)
    return paths
