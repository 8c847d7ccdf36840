"""Command-line entry point.

Exit codes: 0 success, 2 bad configuration or arguments, 3 workload infeasible.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path

from .config import WorkloadConfig, load_config
from .errors import ConfigError, InfeasibleError, InstanceTooLarge
from .gapstudy import gap_study, summarize_gaps
from .metrics import (RunReport, compare, comparison_csv, comparison_text, feasibility_frontier,
                      frontier_csv, frontier_text, infeasible_report, summarize, transformer_family,
                      uniform_family)
from .milp import emit_lp
from .model import LayerProfile
from .strategies import KINDS, StrategyConfig, build_sharp, fold_tasks, run_strategy

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 2, 3


def _resolve_strategy(cfg: WorkloadConfig, name: str) -> StrategyConfig:
    for s in cfg.build_strategies():
        if s.label == name:
            return s
    if name in KINDS:
        return StrategyConfig(name)
    raise ConfigError(f"unknown strategy {name!r}; config defines "
                      f"{[s.label for s in cfg.build_strategies()]}, built-in kinds are {list(KINDS)}")


def simulate(cfg: WorkloadConfig, strategy: StrategyConfig):
    """Run one strategy; returns (report, trace or None). Infeasibility becomes a report."""
    cluster = cfg.build_cluster()
    jobs = cfg.build_jobs()
    if not jobs:
        raise ConfigError("no jobs defined")
    try:
        trace = run_strategy(strategy, jobs, cluster, cfg.engine_options(), cfg.buffer_policy())
    except InfeasibleError as exc:
        return infeasible_report(strategy.label, exc), None
    except InstanceTooLarge as exc:
        raise ConfigError(str(exc)) from exc
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{strategy.label}: {exc}") from exc
    trace.check_invariants()
    return summarize(trace, cluster, strategy.label), trace


def _simulate_report(args) -> RunReport:
    cfg, strategy = args
    return simulate(cfg, strategy)[0]


def _render(report: RunReport, fmt: str) -> str:
    return {"json": report.to_json, "csv": report.to_csv, "text": report.to_text}[fmt]()


def cmd_run(a) -> int:
    cfg = load_config(a.config)
    if a.seed is not None:
        cfg = replace(cfg, seed=a.seed)
    strategy = _resolve_strategy(cfg, a.strategy)
    report, trace = simulate(cfg, strategy)
    sys.stdout.write(_render(report, a.report))
    if trace is None:
        print(f"infeasible: {report.feasibility} (deficit {report.deficit_bytes} B)", file=sys.stderr)
        return EXIT_INFEASIBLE
    if a.trace_out:
        Path(a.trace_out).write_text(trace.to_chrome_json())
    return EXIT_OK


def cmd_compare(a) -> int:
    cfg = load_config(a.config)
    names = [s for s in a.strategies.split(",") if s] if a.strategies else \
        [s.label for s in cfg.build_strategies()]
    strategies = [_resolve_strategy(cfg, n) for n in names]
    if a.baseline not in [s.label for s in strategies]:
        raise ConfigError(f"baseline {a.baseline!r} is not among the compared strategies {names}")
    cfg.build_cluster()
    if not cfg.build_jobs():
        raise ConfigError("no jobs defined")
    work = [(cfg, s) for s in strategies]
    if a.parallel and len(work) > 1:
        with ProcessPoolExecutor(max_workers=min(len(work), a.workers or len(work))) as pool:
            reports = list(pool.map(_simulate_report, work))
    else:
        reports = [_simulate_report(w) for w in work]
    rows = compare(reports, a.baseline)
    sys.stdout.write(comparison_csv(rows) if a.format == "csv" else comparison_text(rows, a.baseline))
    return EXIT_OK


def cmd_gap_study(a) -> int:
    if not 1 <= a.max_tasks <= 10:
        raise ConfigError("--max-tasks must be between 1 and 10")
    if a.instances < 1:
        raise ConfigError("--instances must be >= 1")
    rows = gap_study(a.instances, seed=a.seed, max_tasks=a.max_tasks)
    stats = summarize_gaps(rows, a.threshold)
    if a.format == "json":
        out = {"summary": stats, "instances": [dict(asdict(r), ratio=r.ratio) for r in rows]}
        sys.stdout.write(json.dumps(out, indent=2, sort_keys=True) + "\n")
    elif a.format == "csv":
        print("index,n_tasks,n_jobs,devices,optimal_s,lrtf_s,bound_s,ratio")
        for r in rows:
            print(f"{r.index},{r.n_tasks},{r.n_jobs},{r.devices},{r.optimal_s!r},{r.lrtf_s!r},"
                  f"{r.bound_s!r},{r.ratio!r}")
    else:
        print(f"{'idx':>5} {'tasks':>5} {'jobs':>4} {'devs':>4} {'optimal':>9} {'lrtf':>9} {'ratio':>7}")
        for r in rows:
            print(f"{r.index:>5} {r.n_tasks:>5} {r.n_jobs:>4} {r.devices:>4} {r.optimal_s:>9.3f} "
                  f"{r.lrtf_s:>9.3f} {r.ratio:>7.4f}")
        print()
        for k in ("instances", "min", "mean", "median", "p95", "max", "optimal_fraction",
                  "within_threshold_fraction"):
            v = stats[k]
            print(f"{k:<26} {v:.4f}" if isinstance(v, float) else f"{k:<26} {v}")
        print("optimum from the in-repo exhaustive search (reconstructed reference, not a published one)")
    return EXIT_OK


def cmd_export_milp(a) -> int:
    cfg = load_config(a.config)
    jobs = cfg.build_jobs()
    if not jobs:
        raise ConfigError("no jobs defined; nothing to export")
    cluster = cfg.build_cluster()
    try:
        plan = build_sharp(jobs, cluster, buffer_policy=cfg.buffer_policy())
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    tasks = [t for ts in plan.job_tasks.values() for t in ts]
    instance = replace(fold_tasks(tasks, cluster.h2d), devices=cluster.n_devices)
    text = emit_lp(instance)
    if a.out:
        Path(a.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _parse_sizes(text: str) -> list[float]:
    try:
        sizes = [float(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"--sizes: {exc}") from exc
    if not sizes:
        raise ConfigError("--sizes is empty")
    return sorted(sizes)


def cmd_frontier(a) -> int:
    cfg = load_config(a.config)
    cluster = cfg.build_cluster()
    strategies = cfg.build_strategies() or [StrategyConfig("sharp"), StrategyConfig("model-parallel"),
                                            StrategyConfig("task-parallel")]
    sizes = _parse_sizes(a.sizes)
    if a.family == "uniform":
        uni = [(n, m) for n, m in sorted(cfg.models.items()) if m.kind == "uniform"]
        if not uni:
            raise ConfigError("--family uniform needs a model of kind 'uniform' in the config")
        mc = uni[0][1]
        layer = LayerProfile(**asdict(mc.layer))
        family = uniform_family([int(s) for s in sizes], layer, mc.input_batch_bytes)
    else:
        family = transformer_family(sizes)
    try:
        rows = feasibility_frontier(family, cluster, strategies, cfg.buffer_policy())
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    sys.stdout.write(frontier_csv(rows) if a.format == "csv" else frontier_text(rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shardsim", description="Multi-model training schedule simulator")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate one strategy")
    r.add_argument("--config", required=True)
    r.add_argument("--strategy", required=True)
    r.add_argument("--trace-out")
    r.add_argument("--report", choices=("json", "csv", "text"), default="text")
    r.add_argument("--seed", type=int)
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="run several strategies and tabulate ratios")
    c.add_argument("--config", required=True)
    c.add_argument("--strategies", help="comma-separated names; default: all in the config")
    c.add_argument("--baseline", required=True)
    c.add_argument("--format", choices=("text", "csv"), default="text")
    c.add_argument("--parallel", action="store_true", help="simulate strategies in worker processes")
    c.add_argument("--workers", type=int)
    c.set_defaults(func=cmd_compare)

    g = sub.add_parser("gap-study", help="Sharded-LRTF versus exact optimum on random tiny instances")
    g.add_argument("--instances", type=int, default=200)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--max-tasks", type=int, default=10)
    g.add_argument("--threshold", type=float, default=1.25)
    g.add_argument("--format", choices=("text", "csv", "json"), default="text")
    g.set_defaults(func=cmd_gap_study)

    e = sub.add_parser("export-milp", help="write the makespan MILP in LP format")
    e.add_argument("--config", required=True)
    e.add_argument("--out")
    e.set_defaults(func=cmd_export_milp)

    f = sub.add_parser("frontier", help="largest feasible model per strategy")
    f.add_argument("--config", required=True)
    f.add_argument("--sizes", required=True, help="comma-separated parameter counts (or layer counts)")
    f.add_argument("--family", choices=("transformer", "uniform"), default="transformer")
    f.add_argument("--format", choices=("text", "csv"), default="text")
    f.set_defaults(func=cmd_frontier)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
