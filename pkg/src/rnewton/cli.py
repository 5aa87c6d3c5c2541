"""Command-line interface.

    rnewton simulate <scenario.json> --method newton|newton-like --out DIR
    rnewton bench <spec.json> --out DIR [--paper-scale] [--dry-run]

Both commands write their delimited outputs plus rendered figures into the
output directory and a ``run.json`` with the fully resolved configuration.
On failure a machine-readable error JSON goes to stderr and the exit code
is nonzero.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import __version__
from .bench import (BenchmarkSpec, compute_speedup, run_benchmark,
                    write_results_csv, write_speedup_csv)
from .driver import default_driver_settings, simulate
from .newton import NewtonSettings
from .reservoir import load_scenario

REPORT_COLUMNS = ["step", "t", "dt", "method", "converged", "iterations",
                  "reduced_solves", "full_solves", "residual_norm",
                  "wall_time", "basis_rank", "newton_retry", "halvings"]


def _write_run_json(outdir: Path, payload: dict) -> None:
    payload = dict(payload)
    payload["rnewton_version"] = __version__
    payload["created_unix"] = time.time()
    with open(outdir / "run.json", "w") as fh:
        json.dump(payload, fh, indent=2, default=str)


def _write_report_csv(path: Path, reports) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for rep in reports:
            rec = rep.as_dict()
            writer.writerow([rec[c] for c in REPORT_COLUMNS])


def cmd_simulate(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    scenario = load_scenario(args.scenario, seed=args.seed)
    system, x0 = scenario.build_system()

    method = args.method.replace("-", "_")
    settings = default_driver_settings(system.n_x, method=method)
    newton = NewtonSettings(
        tolerance=scenario.tolerance if scenario.tolerance is not None
        else settings.newton.tolerance,
        max_iterations=scenario.max_iterations)
    settings = replace(settings, newton=newton, strict=args.strict)

    result = simulate(system, x0, scenario.time_grid, settings)

    result.save_csv(outdir / "trajectory.csv")
    result.save_binary(outdir / "trajectory.bin")
    _write_report_csv(outdir / "report.csv", result.reports)
    from .plots import simulation_figures
    figures = simulation_figures(result, system, outdir)

    counts = result.total_counts()
    _write_run_json(outdir, {
        "command": "simulate",
        "scenario": str(args.scenario),
        "method": method,
        "strict": args.strict,
        "seed": args.seed,
        "threads": args.threads,
        "n_x": system.n_x,
        "cells": system.grid.n_cells,
        "n_steps": result.n_steps,
        "settings": {
            "n_bootstrap": settings.n_bootstrap,
            "snapshot_window": settings.snapshot_window,
            "tolerance": settings.newton.tolerance,
            "max_iterations": settings.newton.max_iterations,
        },
        "totals": {**counts, "wall_s": result.total_wall_time},
        "outputs": ["trajectory.csv", "trajectory.bin", "report.csv"]
                   + [f.name for f in figures],
    })
    print(f"simulated {result.n_steps} steps ({system.n_x} states) with "
          f"{method} in {result.total_wall_time:.2f} s -> {outdir}")
    return 0


def cmd_bench(args) -> int:
    outdir = Path(args.out)
    spec = BenchmarkSpec.from_json(args.spec, paper_scale=args.paper_scale,
                                   strict=args.strict if args.strict else None,
                                   seed=args.seed)
    if args.dry_run:
        plan = [{"cells": c, "methods": list(spec.methods),
                 "repetitions": spec.repetitions} for c in spec.sizes]
        print(json.dumps({"planned_sweep": plan, "strict": spec.strict}, indent=2))
        return 0

    outdir.mkdir(parents=True, exist_ok=True)
    result = run_benchmark(spec, threads=args.threads, progress=print)
    summary = compute_speedup(result.rows, result.final_states)

    write_results_csv(outdir / "results.csv", result.rows)
    write_speedup_csv(outdir / "speedup.csv", summary)
    from .plots import benchmark_figures
    figures = benchmark_figures(result.rows, summary, outdir)

    _write_run_json(outdir, {
        "command": "bench",
        "spec": str(args.spec),
        "sizes": spec.sizes,
        "repetitions": spec.repetitions,
        "methods": list(spec.methods),
        "strict": spec.strict,
        "seed": spec.seed,
        "threads": args.threads,
        "timing_indicative": result.timing_indicative,
        "speedup_mean": summary.mean,
        "speedup_std": summary.std,
        "errors": result.errors,
        "outputs": ["results.csv", "speedup.csv"] + [f.name for f in figures],
    })
    for entry in summary.per_size:
        print(f"{entry['cells']:>7} cells: newton {entry['t_newton_s']:.2f} s, "
              f"newton-like {entry['t_newton_like_s']:.2f} s, "
              f"speedup {100.0 * entry['speedup']:.1f}%")
    if summary.per_size:
        print(f"mean speedup {100.0 * summary.mean:.1f}% "
              f"(std {100.0 * summary.std:.1f}%)")
    if result.errors:
        print(f"{len(result.errors)} sweep point(s) failed; see run.json",
              file=sys.stderr)
        return 3
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rnewton",
        description="POD-reduced Newton-like implicit-Euler solver and benchmark")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--strict", action="store_true",
                        help="disable step-halving fallbacks")
    common.add_argument("--seed", type=int, default=None,
                        help="override the field generator seed")
    common.add_argument("--threads", type=int, default=1,
                        help="parallel sweep workers (bench); timings become indicative")

    p_sim = sub.add_parser("simulate", parents=[common],
                           help="run one scenario and export the trajectory")
    p_sim.add_argument("scenario", help="scenario JSON file")
    p_sim.add_argument("--method", choices=["newton", "newton-like"],
                       default="newton-like")
    p_sim.set_defaults(func=cmd_simulate)

    p_bench = sub.add_parser("bench", parents=[common],
                             help="run the Newton vs newton-like sweep")
    p_bench.add_argument("spec", help="benchmark spec JSON file")
    p_bench.add_argument("--dry-run", action="store_true",
                         help="print the planned sweep without executing")
    p_bench.add_argument("--paper-scale", action="store_true",
                         help="use the 1,200..13,200-cell size range")
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        json.dump({"error": {"type": type(exc).__name__, "message": str(exc)}},
                  sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
