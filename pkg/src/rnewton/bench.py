"""Benchmark harness: Newton vs. Newton-like over a sweep of grid sizes.

Each sweep point runs both methods on the same scenario grown to the
requested cell count (more columns of the same field, not a finer mesh),
records wall-clock and solve counts, and reports per-size speedups
(t_newton - t_newton_like) / t_newton with their mean and standard
deviation across sizes.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .driver import TimeGrid, default_driver_settings, simulate
from .newton import NewtonSettings
from .reservoir import SECONDS_PER_DAY, load_scenario

DESK_SIZES = [75, 150, 300, 600, 1200]
# The source experiment's range: 1,200 to 13,200 cells in steps of 1,200.
PAPER_SIZES = [1200 * i for i in range(1, 12)]

METHODS = ("newton", "newton_like")

RESULTS_COLUMNS = ["cells", "n_x", "method", "repetition", "wall_s",
                   "iterations", "reduced_solves", "full_solves",
                   "max_residual", "checksum"]


@dataclass
class BenchmarkSpec:
    scenario: str | dict
    sizes: list[int] = field(default_factory=lambda: list(DESK_SIZES))
    repetitions: int = 1
    methods: tuple[str, ...] = METHODS
    time_spans_days: list | None = None   # overrides the scenario time grid
    strict: bool = True
    seed: int | None = None
    base_dir: Path = Path(".")

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if any(s <= 0 for s in self.sizes):
            raise ValueError("grid sizes must be positive")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")

    @classmethod
    def from_json(cls, path, *, paper_scale: bool = False,
                  strict: bool | None = None, seed: int | None = None) -> "BenchmarkSpec":
        path = Path(path)
        with open(path) as fh:
            cfg = json.load(fh)
        sizes = PAPER_SIZES if paper_scale else cfg.get("sizes", DESK_SIZES)
        spec = cls(
            scenario=cfg["scenario"],
            sizes=list(sizes),
            repetitions=int(cfg.get("repetitions", 1)),
            methods=tuple(cfg.get("methods", METHODS)),
            time_spans_days=cfg.get("time_spans_days"),
            strict=bool(cfg.get("strict", True)),
            seed=cfg.get("seed"),
            base_dir=path.parent,
        )
        if strict is not None:
            spec.strict = strict
        if seed is not None:
            spec.seed = seed
        return spec


@dataclass
class BenchmarkRow:
    cells: int
    n_x: int
    method: str
    repetition: int
    wall_s: float
    iterations: int
    reduced_solves: int
    full_solves: int
    max_residual: float
    checksum: str

    def as_list(self) -> list:
        return [getattr(self, c) for c in RESULTS_COLUMNS]


@dataclass
class BenchmarkResult:
    rows: list[BenchmarkRow]
    final_states: dict          # (cells, method) -> last-repetition final state
    reports: dict               # (cells, method) -> last-repetition reports
    errors: list[dict] = field(default_factory=list)
    timing_indicative: bool = False


def trajectory_checksum(trajectory: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(trajectory).tobytes()).hexdigest()[:16]


def _scenario_for_size(spec: BenchmarkSpec, cells: int):
    if isinstance(spec.scenario, str):
        with open(spec.base_dir / spec.scenario) as fh:
            cfg = json.load(fh)
    else:
        cfg = dict(spec.scenario)
    rows = int(cfg["grid"]["rows"])
    if cells % rows:
        raise ValueError(f"{cells} cells not divisible by {rows} grid rows")
    max_cols = max(spec.sizes) // rows if max(spec.sizes) % rows == 0 else None
    scenario = load_scenario(cfg, columns=cells // rows, field_columns=max_cols,
                             seed=spec.seed, base_dir=spec.base_dir)
    if spec.time_spans_days is not None:
        scenario.time_grid = TimeGrid.from_spans(spec.time_spans_days,
                                                 unit=SECONDS_PER_DAY)
    return scenario


def _run_point(spec: BenchmarkSpec, cells: int):
    rows: list[BenchmarkRow] = []
    finals = {}
    reports = {}
    errors = []
    try:
        scenario = _scenario_for_size(spec, cells)
        system, x0 = scenario.build_system()
    except Exception as exc:
        for method in spec.methods:
            rows.append(BenchmarkRow(cells, -1, method, 0, math.nan, 0, 0, 0,
                                     math.nan, f"error:{type(exc).__name__}"))
        errors.append({"cells": cells, "error": f"{type(exc).__name__}: {exc}"})
        return rows, finals, reports, errors

    for method in spec.methods:
        settings = default_driver_settings(system.n_x, method=method)
        newton = NewtonSettings(
            tolerance=scenario.tolerance if scenario.tolerance is not None
            else settings.newton.tolerance,
            max_iterations=scenario.max_iterations)
        settings = replace(settings, newton=newton, strict=spec.strict)
        for rep in range(spec.repetitions):
            try:
                result = simulate(system, x0, scenario.time_grid, settings)
            except Exception as exc:
                rows.append(BenchmarkRow(cells, system.n_x, method, rep, math.nan,
                                         0, 0, 0, math.nan,
                                         f"error:{type(exc).__name__}"))
                errors.append({"cells": cells, "method": method, "repetition": rep,
                               "error": f"{type(exc).__name__}: {exc}"})
                break
            counts = result.total_counts()
            rows.append(BenchmarkRow(
                cells, system.n_x, method, rep, result.total_wall_time,
                counts["iterations"], counts["reduced_solves"],
                counts["full_solves"], counts["max_residual"],
                trajectory_checksum(result.trajectory)))
            finals[(cells, method)] = result.trajectory[-1]
            reports[(cells, method)] = result.reports
    return rows, finals, reports, errors


def run_benchmark(spec: BenchmarkSpec, threads: int = 1,
                  progress=None) -> BenchmarkResult:
    """One row per size x method x repetition; sweep points run sequentially
    unless ``threads > 1`` (then wall-clock numbers are only indicative)."""
    result = BenchmarkResult([], {}, {}, timing_indicative=threads > 1)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            points = list(pool.map(lambda c: _run_point(spec, c), spec.sizes))
    else:
        points = []
        for cells in spec.sizes:
            if progress:
                progress(f"running {cells} cells ...")
            points.append(_run_point(spec, cells))
    for rows, finals, reports, errors in points:
        result.rows.extend(rows)
        result.final_states.update(finals)
        result.reports.update(reports)
        result.errors.extend(errors)
    return result


# ---------------------------------------------------------------------------
# Speedup


@dataclass
class SpeedupSummary:
    per_size: list[dict]     # cells, t_newton_s, t_newton_like_s, speedup, ...
    mean: float
    std: float


def compute_speedup(rows: list[BenchmarkRow],
                    final_states: dict | None = None) -> SpeedupSummary:
    """Per-size speedup from the median wall-clock over repetitions.

    Sizes missing either method's rows are skipped with a warning.  When
    final states are supplied, the relative cross-method difference of the
    final state is reported alongside.
    """
    sizes = sorted({r.cells for r in rows})
    per_size = []
    for cells in sizes:
        times = {}
        for method in METHODS:
            walls = [r.wall_s for r in rows
                     if r.cells == cells and r.method == method
                     and math.isfinite(r.wall_s)]
            if walls:
                times[method] = float(np.median(walls))
        if set(times) != set(METHODS):
            warnings.warn(f"size {cells}: missing rows for "
                          f"{sorted(set(METHODS) - set(times))}, skipped")
            continue
        entry = {
            "cells": cells,
            "t_newton_s": times["newton"],
            "t_newton_like_s": times["newton_like"],
            "speedup": (times["newton"] - times["newton_like"]) / times["newton"],
        }
        if final_states is not None and (cells, "newton") in final_states \
                and (cells, "newton_like") in final_states:
            x_n = final_states[(cells, "newton")]
            x_nl = final_states[(cells, "newton_like")]
            entry["final_state_rel_diff"] = float(
                np.linalg.norm(x_n - x_nl) / np.linalg.norm(x_n))
        per_size.append(entry)
    speedups = np.array([e["speedup"] for e in per_size])
    mean = float(speedups.mean()) if speedups.size else math.nan
    std = float(speedups.std()) if speedups.size else math.nan
    return SpeedupSummary(per_size, mean, std)


# ---------------------------------------------------------------------------
# CSV I/O


def write_results_csv(path, rows: list[BenchmarkRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULTS_COLUMNS)
        for row in rows:
            writer.writerow(row.as_list())


def read_results_csv(path) -> list[BenchmarkRow]:
    """Parse a results.csv back into typed rows (schema round-trip)."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RESULTS_COLUMNS:
            raise ValueError(f"unexpected results schema: {reader.fieldnames}")
        for rec in reader:
            out.append(BenchmarkRow(
                cells=int(rec["cells"]), n_x=int(rec["n_x"]),
                method=rec["method"], repetition=int(rec["repetition"]),
                wall_s=float(rec["wall_s"]), iterations=int(rec["iterations"]),
                reduced_solves=int(rec["reduced_solves"]),
                full_solves=int(rec["full_solves"]),
                max_residual=float(rec["max_residual"]),
                checksum=rec["checksum"]))
    return out


def write_speedup_csv(path, summary: SpeedupSummary) -> None:
    columns = ["cells", "t_newton_s", "t_newton_like_s", "speedup",
               "final_state_rel_diff"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for entry in summary.per_size:
            writer.writerow([entry.get(c, "") for c in columns])
