"""Command-line entry point: ``run``, ``reproduce-fig1`` and ``selftest``.

Exit codes: 0 success, 2 usage/config error, 3 selftest failure.
"""

import argparse
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from robust_assort import __version__, kernels, selftest
from robust_assort.config import (
    ConfigError,
    build_config,
    dump_config,
    load_config_file,
)
from robust_assort.simulator import (
    POLICIES,
    aggregate,
    checkpoint_grid,
    run_traces,
    write_aggregate_csv,
    write_trace_csv,
)

EXIT_OK, EXIT_USAGE, EXIT_SELFTEST = 0, 2, 3

FIG1_PRESETS = {
    "N100K10": (100, 10),
    "N100K20": (100, 20),
    "N300K10": (300, 10),
    "N300K20": (300, 20),
}
FIG1_EPS = (0.0, 0.05, 0.1)
FIG1_HORIZONS = (1000, 2000, 5000, 10000, 20000)
FIG1_FULL_TRIALS = 100

# flag name -> config key
OVERRIDES = {
    "policy": "policies",
    "eps": "eps",
    "eps_bar": "eps_bar",
    "n": "n",
    "k": "k",
    "t": "t",
    "trials": "trials",
    "seed": "seed",
    "out": "out",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _default_jobs():
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def build_parser():
    p = _Parser(prog="robust-assort", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run a configured regret experiment")
    run.add_argument("--config", type=Path, help="flat TOML config file")
    run.add_argument("--policy", help=f"policy or comma list ({', '.join(POLICIES)})")
    run.add_argument("--eps", type=float)
    run.add_argument("--eps-bar", type=float)
    run.add_argument("--n", type=int)
    run.add_argument("--k", type=int)
    run.add_argument("--t", type=int)
    run.add_argument("--trials", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--jobs", type=int, default=_default_jobs())
    run.add_argument("--out", type=str)
    run.add_argument("--full-trace", action="store_true", default=None,
                     help="write every period instead of the checkpoint grid")

    fig = sub.add_parser("reproduce-fig1", help="contaminated-instance comparison across T")
    fig.add_argument("preset", help=f"one of {', '.join(FIG1_PRESETS)}")
    fig.add_argument("--eps", type=float, default=0.1,
                     help="outlier proportion: 0.05 or 0.1 (0 = clean control)")
    fig.add_argument("--trials", type=int, default=20)
    fig.add_argument("--full-trials", action="store_true",
                     help=f"use {FIG1_FULL_TRIALS} trials per point")
    fig.add_argument("--seed", type=int, default=0)
    fig.add_argument("--checkpoints", type=int, default=50)
    fig.add_argument("--jobs", type=int, default=_default_jobs())
    fig.add_argument("--out", type=str, default="out/fig1")

    sub.add_parser("selftest", help="oracle-equivalence and invariant suites")
    return p


def resolve_run_config(args):
    values, text, source = {}, "", "<flags>"
    if args.config is not None:
        if not args.config.exists():
            raise ConfigError(f"{args.config}: config file not found")
        values, text = load_config_file(args.config)
        source = str(args.config)
    for flag, key in OVERRIDES.items():
        val = getattr(args, flag)
        if val is None:
            continue
        if key == "policies":
            val = tuple(p.strip() for p in val.split(",") if p.strip())
        values[key] = val
    if args.full_trace:
        values["full_trace"] = True
    return build_config(values, source, text)


def write_outputs(config, traces, out_dir):
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = checkpoint_grid(config.t, config.checkpoints)
    files = {}
    for policy in config.policies:
        trs = [tr for tr in traces if tr.policy == policy]
        tpath = out_dir / f"{policy}_traces.csv"
        apath = out_dir / f"{policy}_aggregate.csv"
        write_trace_csv(tpath, trs, None if config.full_trace else grid)
        write_aggregate_csv(apath, aggregate(trs, grid))
        files[policy] = {"traces": str(tpath), "aggregate": str(apath)}
    return files


def write_manifest(path, config, files, seconds, extra=None):
    manifest = {
        "config": config.to_dict(),
        "config_toml": dump_config(config),
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        "wall_clock_seconds": round(seconds, 3),
        "outputs": files,
    }
    manifest.update(extra or {})
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def cmd_run(args):
    config = resolve_run_config(args)
    start = time.perf_counter()
    traces = run_traces(config, jobs=args.jobs)
    out_dir = Path(config.out)
    files = write_outputs(config, traces, out_dir)
    write_manifest(out_dir / "manifest.json", config, files, time.perf_counter() - start)
    print(f"wrote {len(traces)} traces for {', '.join(config.policies)} to {out_dir}")
    return EXIT_OK


def cmd_reproduce_fig1(args):
    if args.preset not in FIG1_PRESETS:
        raise ConfigError(f"unknown preset {args.preset!r}; choose from {', '.join(FIG1_PRESETS)}")
    if args.eps not in FIG1_EPS:
        raise ConfigError(f"--eps must be one of {FIG1_EPS}")
    n, k = FIG1_PRESETS[args.preset]
    trials = FIG1_FULL_TRIALS if args.full_trials else args.trials
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    base = build_config({"n": n, "k": k, "t": FIG1_HORIZONS[0], "eps": args.eps,
                         "trials": trials, "seed": args.seed,
                         "checkpoints": args.checkpoints, "out": str(out_dir)})
    start = time.perf_counter()
    rows, finals = [], []
    for horizon in FIG1_HORIZONS:
        config = replace(base, t=horizon)
        grid = checkpoint_grid(horizon, config.checkpoints)
        traces = run_traces(config, jobs=args.jobs)
        for row in aggregate(traces, grid):
            row = {"T": horizon, **row}
            rows.append(row)
            if row["t"] == horizon:
                finals.append(row)
        print(f"T={horizon}: " + ", ".join(
            f"{r['policy']}={r['mean_avg_regret']:.4f}" for r in finals if r["T"] == horizon),
            flush=True)
    stem = f"fig1_{args.preset}_eps{args.eps:g}"
    curves = out_dir / f"{stem}.csv"
    summary = out_dir / f"{stem}_final.csv"
    write_aggregate_csv(curves, rows, extra_columns=("T",))
    write_aggregate_csv(summary, finals, extra_columns=("T",))
    write_manifest(out_dir / f"{stem}_manifest.json", base,
                   {"curves": str(curves), "final": str(summary)},
                   time.perf_counter() - start,
                   {"horizons": list(FIG1_HORIZONS), "preset": args.preset})
    return EXIT_OK


def cmd_selftest(args):
    start = time.perf_counter()
    results = selftest.run_all()
    total = sum(r.cases for r in results)
    bad = [r for r in results if not r.ok]
    print(f"{len(results)} suites, {total} cases, {len(bad)} failing suites "
          f"({time.perf_counter() - start:.1f}s, kernels={kernels.BACKEND})")
    return EXIT_SELFTEST if bad else EXIT_OK


COMMANDS = {"run": cmd_run, "reproduce-fig1": cmd_reproduce_fig1, "selftest": cmd_selftest}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
