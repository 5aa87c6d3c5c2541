"""Time-stepping driver.

Runs implicit Euler over a time grid: plain Newton for the first ``n_bootstrap``
steps, then a fresh POD basis from the trailing snapshot window followed by a
Newton-like solve for every later step.  A plain-Newton driver (``method =
"newton"``) is kept for baseline comparison.

Robustness fallbacks (artifact additions, disabled by ``strict``):
a non-convergent Newton-like step first retries with plain Newton; a step
that still fails is re-integrated as 2**m sub-steps for m = 1..5.
"""

from __future__ import annotations

import math
import struct
import time
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import EvaluationError, LinearSolveError, RnewtonError, SimulationAbort
from .newton import NewtonSettings, newton_solve
from .ode import EMPTY_SIGNAL, OdeSystem, PiecewiseConstantSignal, ResidualProblem
from .pod import DEFAULT_POD_THRESHOLD, build_snapshot_matrix, compute_pod_basis
from .reduced import newton_like_solve

TRAJECTORY_MAGIC = b"RNWT1"
MAX_STEP_HALVINGS = 5


@dataclass(frozen=True)
class TimeGrid:
    """Step sizes dt_0 ... dt_{N-1} (seconds) starting at t0."""

    dt: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        dt = np.asarray(self.dt, dtype=float)
        if dt.ndim != 1 or dt.size == 0 or not np.all(dt > 0):
            raise ValueError("dt must be a non-empty vector of positive step sizes")
        object.__setattr__(self, "dt", dt)

    @property
    def n_steps(self) -> int:
        return self.dt.size

    @property
    def times(self) -> np.ndarray:
        """t_0 ... t_N including both endpoints."""
        return self.t0 + np.concatenate(([0.0], np.cumsum(self.dt)))

    @classmethod
    def from_spans(cls, spans, unit: float = 1.0, t0: float = 0.0) -> "TimeGrid":
        """Build from ``[(count, step), ...]``; ``unit`` scales steps to seconds."""
        dts = np.concatenate([np.full(int(n), float(h) * unit) for n, h in spans])
        return cls(dts, t0)


@dataclass(frozen=True)
class DriverSettings:
    n_bootstrap: int
    snapshot_window: int
    newton: NewtonSettings
    method: str = "newton_like"        # "newton" | "newton_like"
    pod_threshold: float = DEFAULT_POD_THRESHOLD
    strict: bool = False               # disable step-halving fallback

    def __post_init__(self):
        if self.n_bootstrap < 1 or self.snapshot_window < 1:
            raise ValueError("n_bootstrap and snapshot_window must be >= 1")
        if self.method not in ("newton", "newton_like"):
            raise ValueError(f"unknown method {self.method!r}")


def default_driver_settings(n_x: int, method: str = "newton_like",
                            **newton_kwargs) -> DriverSettings:
    """Defaults scaled to the state dimension.

    Bootstrap length ceil(ln n_x) and snapshot window ceil(n_x**(1/3)),
    rounded up so at least the prescribed history is available.
    """
    if n_x < 2:
        raise ValueError("n_x must be >= 2")
    return DriverSettings(
        n_bootstrap=math.ceil(math.log(n_x)),
        snapshot_window=math.ceil(np.cbrt(float(n_x))),
        newton=NewtonSettings.for_dimension(n_x, **newton_kwargs),
        method=method,
    )


@dataclass
class SolveReport:
    """Per-step instrumentation."""

    step: int
    t: float
    dt: float
    method: str                 # solver that produced the accepted state
    converged: bool
    iterations: int
    reduced_solves: int
    full_solves: int
    residual_norm: float
    wall_time: float
    linear_solve_times: list[float] = field(default_factory=list)
    basis_rank: int = 0
    newton_retry: bool = False
    halvings: int = 0
    iteration_log: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "step": self.step, "t": self.t, "dt": self.dt, "method": self.method,
            "converged": self.converged, "iterations": self.iterations,
            "reduced_solves": self.reduced_solves, "full_solves": self.full_solves,
            "residual_norm": self.residual_norm, "wall_time": self.wall_time,
            "basis_rank": self.basis_rank, "newton_retry": self.newton_retry,
            "halvings": self.halvings,
        }


@dataclass
class SimulationResult:
    trajectory: np.ndarray       # (N+1, n_x), row k is x_k
    times: np.ndarray            # (N+1,)
    reports: list[SolveReport]
    total_wall_time: float

    @property
    def n_x(self) -> int:
        return self.trajectory.shape[1]

    @property
    def n_steps(self) -> int:
        return self.trajectory.shape[0] - 1

    def total_counts(self) -> dict:
        return {
            "iterations": sum(r.iterations for r in self.reports),
            "reduced_solves": sum(r.reduced_solves for r in self.reports),
            "full_solves": sum(r.full_solves for r in self.reports),
            "max_residual": max((r.residual_norm for r in self.reports), default=0.0),
            "newton_retries": sum(r.newton_retry for r in self.reports),
            "halvings": sum(r.halvings for r in self.reports),
        }

    def save_csv(self, path) -> None:
        """One row per time index: t, x_1 ... x_{n_x}."""
        header = "t," + ",".join(f"x_{i+1}" for i in range(self.n_x))
        data = np.column_stack([self.times, self.trajectory])
        np.savetxt(path, data, delimiter=",", header=header, comments="",
                   fmt="%.17g")

    def save_binary(self, path) -> None:
        """Compact dump: magic "RNWT1", n_x and N as little-endian int64,
        then the n_x-by-(N+1) state matrix column-major as float64."""
        with open(path, "wb") as fh:
            fh.write(TRAJECTORY_MAGIC)
            fh.write(struct.pack("<qq", self.n_x, self.n_steps))
            fh.write(np.ravel(self.trajectory.T, order="F").tobytes())


def load_trajectory_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :meth:`SimulationResult.save_csv`: returns (times, trajectory)."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1:]


def load_trajectory_binary(path) -> np.ndarray:
    """Read a trajectory dump; returns the (N+1, n_x) state matrix."""
    with open(path, "rb") as fh:
        magic = fh.read(5)
        if magic != TRAJECTORY_MAGIC:
            raise RnewtonError(f"bad trajectory magic {magic!r}")
        n_x, n_steps = struct.unpack("<qq", fh.read(16))
        flat = np.frombuffer(fh.read(), dtype="<f8")
    if flat.size != n_x * (n_steps + 1):
        raise RnewtonError("truncated trajectory dump")
    return flat.reshape((n_x, n_steps + 1), order="F").T.copy()


def _solve_step_with_fallbacks(system, x_k, u_k, d_k, dt, basis, settings,
                               step, t) -> tuple[np.ndarray, SolveReport]:
    """One accepted step, applying the fallback ladder on failure."""
    t_start = time.perf_counter()
    problem = ResidualProblem(system, x_k, u_k, d_k, dt)
    report = SolveReport(step=step, t=t, dt=dt, method="newton", converged=False,
                         iterations=0, reduced_solves=0, full_solves=0,
                         residual_norm=math.nan, wall_time=0.0)

    if basis is not None:
        report.method = "newton_like"
        report.basis_rank = basis.n_r
        try:
            out = newton_like_solve(problem, x_k, basis, settings.newton)
        except (EvaluationError, LinearSolveError):
            out = None
        if out is not None and out.converged:
            report.converged = True
            report.iterations = out.iterations
            report.reduced_solves = out.reduced_solves
            report.full_solves = out.full_solves
            report.residual_norm = out.residual_norm
            report.iteration_log = out.iteration_log
            report.linear_solve_times = [rec.solve_time for rec in out.iteration_log]
            report.wall_time = time.perf_counter() - t_start
            return out.x, report
        # Fallback 1: plain Newton on the same step.
        report.newton_retry = True
        if out is not None:
            report.iterations += out.iterations
            report.reduced_solves += out.reduced_solves
            report.full_solves += out.full_solves
            report.iteration_log = out.iteration_log

    try:
        out = newton_solve(problem, x_k, settings.newton)
    except (EvaluationError, LinearSolveError):
        out = None
    if out is not None and out.converged:
        report.iterations += out.iterations
        report.full_solves += len(out.linear_solve_times)
        report.residual_norm = out.residual_norm
        report.converged = True
        report.linear_solve_times += out.linear_solve_times
        report.wall_time = time.perf_counter() - t_start
        return out.x, report
    if out is not None:
        report.iterations += out.iterations
        report.full_solves += len(out.linear_solve_times)

    if settings.strict:
        report.wall_time = time.perf_counter() - t_start
        raise SimulationAbort(f"step {step} did not converge (strict mode)", None,
                              None, step)

    # Fallback 2: re-integrate the step as 2**m equal sub-steps.
    for halvings in range(1, MAX_STEP_HALVINGS + 1):
        n_sub = 2 ** halvings
        sub_dt = dt / n_sub
        x = x_k
        ok = True
        sub_iters = 0
        sub_solves = 0
        last = None
        for _ in range(n_sub):
            sub_problem = ResidualProblem(system, x, u_k, d_k, sub_dt)
            try:
                last = newton_solve(sub_problem, x, settings.newton)
            except (EvaluationError, LinearSolveError):
                ok = False
                break
            if not last.converged:
                ok = False
                break
            sub_iters += last.iterations
            sub_solves += len(last.linear_solve_times)
            x = last.x
        if ok:
            report.halvings = halvings
            report.iterations += sub_iters
            report.full_solves += sub_solves
            report.residual_norm = last.residual_norm
            report.converged = True
            report.wall_time = time.perf_counter() - t_start
            return x, report

    report.wall_time = time.perf_counter() - t_start
    raise SimulationAbort(
        f"step {step} did not converge after Newton retry and "
        f"{MAX_STEP_HALVINGS} step halvings", None, None, step)


def simulate(system: OdeSystem, x0: np.ndarray, grid: TimeGrid,
             settings: DriverSettings,
             u: PiecewiseConstantSignal | None = None,
             d: PiecewiseConstantSignal | None = None) -> SimulationResult:
    """Integrate over the grid; per-step solver choice per the settings.

    Steps before ``n_bootstrap`` (and every step when ``method="newton"``)
    use plain Newton.  Later steps build the snapshot window from the
    accepted trajectory, compute a fresh POD basis and run the Newton-like
    solver with initial guess x_k.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (system.n_x,):
        raise ValueError(f"x0 has shape {x0.shape}, expected ({system.n_x},)")
    if not np.all(np.isfinite(x0)):
        raise EvaluationError("non-finite initial state")
    u = u if u is not None else EMPTY_SIGNAL
    d = d if d is not None else EMPTY_SIGNAL

    times = grid.times
    trajectory = [x0]
    reports: list[SolveReport] = []
    t_start = time.perf_counter()
    # The per-operation sizes are small enough that BLAS threading only adds
    # scheduling noise; one thread keeps runs deterministic and timings clean.
    with threadpool_limits(limits=1):
        for k in range(grid.n_steps):
            dt = float(grid.dt[k])
            t_k = float(times[k])
            u_k = u.value_at(t_k)
            d_k = d.value_at(t_k)
            x_k = trajectory[-1]

            basis = None
            if settings.method == "newton_like" and k >= settings.n_bootstrap:
                snapshots = build_snapshot_matrix(trajectory, k, settings.snapshot_window)
                basis = compute_pod_basis(snapshots, settings.pod_threshold)

            try:
                x_next, report = _solve_step_with_fallbacks(
                    system, x_k, u_k, d_k, dt, basis, settings, k, t_k)
            except SimulationAbort as exc:
                raise SimulationAbort(str(exc), np.array(trajectory), reports, k) from None
            trajectory.append(x_next)
            reports.append(report)

    total = time.perf_counter() - t_start
    return SimulationResult(np.array(trajectory), times, reports, total)
