"""Figure rendering for the report paths.

Every CLI report directory gets plot files next to the CSV output:
the benchmark writes computation-time and speedup figures, a simulation
writes a pressure/saturation summary of the trajectory.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .bench import SpeedupSummary
from .driver import SimulationResult
from .reservoir import SECONDS_PER_DAY, ReservoirSystem, cell_pressures, water_saturations

_METHOD_STYLES = {
    "newton": dict(color="tab:blue", marker="o", label="Newton"),
    "newton_like": dict(color="tab:orange", marker="s", label="Newton-like"),
}


def benchmark_figures(rows, summary: SpeedupSummary, outdir) -> list[Path]:
    """computation_time.png and speedup.png from benchmark rows."""
    outdir = Path(outdir)
    written = []

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    plotted = False
    for method, style in _METHOD_STYLES.items():
        pts = sorted({(r.cells, r.wall_s) for r in rows
                      if r.method == method and np.isfinite(r.wall_s)})
        by_size = {}
        for cells, wall in pts:
            by_size.setdefault(cells, []).append(wall)
        if not by_size:
            continue
        sizes = sorted(by_size)
        medians = [float(np.median(by_size[s])) for s in sizes]
        ax.plot(sizes, medians, **style)
        plotted = True
    ax.set_xlabel("grid cells")
    ax.set_ylabel("computation time [s]")
    if plotted:
        ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    path = outdir / "computation_time.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    if summary.per_size:
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        sizes = [e["cells"] for e in summary.per_size]
        ax.plot(sizes, [100.0 * e["speedup"] for e in summary.per_size],
                color="tab:green", marker="d")
        ax.axhline(100.0 * summary.mean, color="gray", linestyle="--",
                   label=f"mean {100.0 * summary.mean:.0f}%")
        ax.set_xlabel("grid cells")
        ax.set_ylabel("speedup [%]")
        ax.legend()
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        path = outdir / "speedup.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written


def simulation_figures(result: SimulationResult, system: ReservoirSystem,
                       outdir, max_frames: int = 200) -> list[Path]:
    """pressure_saturation.png: pressure envelope and mean water saturation
    over time, recomputed from the trajectory."""
    outdir = Path(outdir)
    n_t = result.trajectory.shape[0]
    idx = np.unique(np.linspace(0, n_t - 1, min(max_frames, n_t)).astype(int))
    days = result.times[idx] / SECONDS_PER_DAY

    p_min, p_mean, p_max, sw_mean = [], [], [], []
    for k in idx:
        p = cell_pressures(system, result.trajectory[k])
        s = water_saturations(system, result.trajectory[k])
        p_min.append(p.min())
        p_mean.append(p.mean())
        p_max.append(p.max())
        sw_mean.append(s.mean())

    fig, (ax_p, ax_s) = plt.subplots(2, 1, figsize=(6.0, 6.0), sharex=True)
    ax_p.fill_between(days, np.array(p_min) / 1e6, np.array(p_max) / 1e6,
                      alpha=0.25, color="tab:blue", label="min/max")
    ax_p.plot(days, np.array(p_mean) / 1e6, color="tab:blue", label="mean")
    ax_p.set_ylabel("pressure [MPa]")
    ax_p.legend()
    ax_p.grid(True, alpha=0.3)

    ax_s.plot(days, sw_mean, color="tab:red")
    ax_s.set_ylabel("mean water saturation")
    ax_s.set_xlabel("time [days]")
    ax_s.grid(True, alpha=0.3)

    fig.tight_layout()
    path = outdir / "pressure_saturation.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return [path]
