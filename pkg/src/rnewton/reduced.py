"""Newton-like method: Newton iterations with reduced-order linear solves.

Each iteration projects the Newton system onto the POD basis and solves the
small dense system (V^T A V) dxh = V^T b, updating x <- x + V dxh.  When the
previous reduced step was shorter than the stagnation threshold, one
full-order solve is performed instead; the bookkeeping guarantees the full
system is never solved twice in a row.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import EvaluationError, LinearSolveError
from .newton import NewtonSettings, solve_full_linear_system
from .ode import ResidualProblem, evaluate_residual, evaluate_residual_jacobian
from .pod import ProjectionBasis


@dataclass(frozen=True)
class IterationRecord:
    kind: str            # "reduced" | "reduced_failed" | "full"
    step_norm: float     # ||dxh|| for reduced, ||dx|| for full
    solve_time: float


@dataclass
class NewtonLikeOutcome:
    x: np.ndarray
    iterations: int
    reduced_solves: int
    full_solves: int
    residual_norm: float
    converged: bool
    iteration_log: list[IterationRecord] = field(default_factory=list)
    iterates: list[np.ndarray] | None = None


def reduced_newton_step(a: sp.spmatrix, b: np.ndarray,
                        basis: ProjectionBasis) -> tuple[np.ndarray, np.ndarray]:
    """Solve (V^T A V) dxh = V^T b and lift: returns (dxh, V dxh)."""
    v = basis.v
    av = a @ v
    a_hat = v.T @ av
    b_hat = v.T @ np.asarray(b, dtype=float)
    try:
        dxh = np.linalg.solve(a_hat, b_hat)
    except np.linalg.LinAlgError as exc:
        raise LinearSolveError(f"singular reduced system: {exc}") from exc
    if not np.all(np.isfinite(dxh)):
        raise LinearSolveError("non-finite reduced step")
    return dxh, v @ dxh


def newton_like_solve(problem: ResidualProblem, x_init: np.ndarray,
                      basis: ProjectionBasis, settings: NewtonSettings) -> NewtonLikeOutcome:
    """Newton-like iteration until ||R|| < tolerance.

    A full-order solve happens only when the previous iteration was a
    reduced step of norm below the stagnation threshold; after a full solve
    the stored step norm is treated as large again, so two consecutive
    full-order solves cannot occur.  A singular reduced system counts as a
    stagnated reduced step and triggers the full solve on the next
    iteration.
    """
    x = np.asarray(x_init, dtype=float).copy()
    if not np.all(np.isfinite(x)):
        raise EvaluationError("non-finite initial guess")

    log: list[IterationRecord] = []
    iterates = [x.copy()] if settings.record_iterates else None
    reduced_solves = 0
    full_solves = 0
    prev_step_stagnated = False

    r = evaluate_residual(problem, x)
    rnorm = float(np.linalg.norm(r))
    ell = 0
    while rnorm >= settings.tolerance:
        if ell >= settings.max_iterations:
            return NewtonLikeOutcome(x, ell, reduced_solves, full_solves, rnorm,
                                     False, log, iterates)
        a = evaluate_residual_jacobian(problem, x)
        b = -r
        if ell > 0 and prev_step_stagnated:
            t0 = time.perf_counter()
            dx = solve_full_linear_system(a, b)
            log.append(IterationRecord("full", float(np.linalg.norm(dx)),
                                       time.perf_counter() - t0))
            full_solves += 1
            prev_step_stagnated = False
        else:
            t0 = time.perf_counter()
            try:
                dxh, dx = reduced_newton_step(a, b, basis)
            except LinearSolveError:
                dx = np.zeros_like(x)
                log.append(IterationRecord("reduced_failed", 0.0,
                                           time.perf_counter() - t0))
                prev_step_stagnated = True
            else:
                log.append(IterationRecord("reduced", float(np.linalg.norm(dxh)),
                                           time.perf_counter() - t0))
                prev_step_stagnated = float(np.linalg.norm(dxh)) < settings.stagnation
            reduced_solves += 1
        x = x + dx
        if not np.all(np.isfinite(x)):
            raise EvaluationError("non-finite Newton-like iterate")
        if iterates is not None:
            iterates.append(x.copy())
        ell += 1
        r = evaluate_residual(problem, x)
        rnorm = float(np.linalg.norm(r))
    return NewtonLikeOutcome(x, ell, reduced_solves, full_solves, rnorm, True, log, iterates)
