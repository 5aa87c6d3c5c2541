"""Full-order Newton's method for one implicit-Euler step.

Each iteration solves the sparse linearized system A dx = b with
A = dR/dx and b = -R by a direct sparse factorization, then updates
x <- x + dx.  The residual norm is checked *before* each iteration, so an
initial guess that already satisfies the tolerance performs zero solves.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import EvaluationError, LinearSolveError
from .ode import ResidualProblem, evaluate_residual, evaluate_residual_jacobian


def default_tolerance(n_x: int) -> float:
    """Dimension-aware absolute tolerance on the Euclidean residual norm."""
    return 1e-8 * math.sqrt(n_x)


@dataclass(frozen=True)
class NewtonSettings:
    tolerance: float
    max_iterations: int = 50
    # Threshold on the reduced-step norm that triggers a full-order solve in
    # the Newton-like method; defaults to `tolerance` when None.
    stagnation_tolerance: float | None = None
    # Keep per-iteration iterates (memory-heavy; used by equivalence tests).
    record_iterates: bool = False

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    @property
    def stagnation(self) -> float:
        return self.tolerance if self.stagnation_tolerance is None else self.stagnation_tolerance

    @classmethod
    def for_dimension(cls, n_x: int, **kwargs) -> "NewtonSettings":
        return cls(tolerance=default_tolerance(n_x), **kwargs)


@dataclass
class NewtonOutcome:
    x: np.ndarray
    iterations: int
    residual_norm: float
    converged: bool
    linear_solve_times: list[float] = field(default_factory=list)
    iterates: list[np.ndarray] | None = None


def solve_full_linear_system(a: sp.spmatrix, b: np.ndarray,
                             permc_spec: str | None = None) -> np.ndarray:
    """Direct sparse solve of ``a @ dx = b`` (SuperLU factorization).

    ``permc_spec`` selects the column ordering; None keeps the library
    default.  Raises LinearSolveError on structural/numerical singularity or
    when the backward error is far beyond what a stable direct solve should
    give.
    """
    b = np.asarray(b, dtype=float)
    n = b.size
    if a.shape != (n, n):
        raise ValueError(f"matrix shape {a.shape} incompatible with rhs of length {n}")
    try:
        if sp.issparse(a):
            a_csc = a.tocsc()
        else:
            a_csc = sp.csc_matrix(a)
        lu = spla.splu(a_csc, permc_spec=permc_spec) if permc_spec \
            else spla.splu(a_csc)
        dx = lu.solve(b)
    except RuntimeError as exc:  # SuperLU signals exact singularity this way
        raise LinearSolveError(f"sparse factorization failed: {exc}") from exc
    if not np.all(np.isfinite(dx)):
        raise LinearSolveError("non-finite solution from sparse solve")
    bnorm = np.linalg.norm(b)
    if bnorm > 0:
        backward = np.linalg.norm(a @ dx - b) / bnorm
        if backward > 1e-8:
            raise LinearSolveError(f"ill-conditioned system: backward error {backward:.2e}")
    return dx


def newton_solve(problem: ResidualProblem, x_init: np.ndarray,
                 settings: NewtonSettings) -> NewtonOutcome:
    """Newton iteration on the implicit-Euler residual until ||R|| < tolerance."""
    x = np.asarray(x_init, dtype=float).copy()
    if not np.all(np.isfinite(x)):
        raise EvaluationError("non-finite initial guess")

    iterates = [x.copy()] if settings.record_iterates else None
    solve_times: list[float] = []

    r = evaluate_residual(problem, x)
    rnorm = float(np.linalg.norm(r))
    iterations = 0
    while rnorm >= settings.tolerance:
        if iterations >= settings.max_iterations:
            return NewtonOutcome(x, iterations, rnorm, False, solve_times, iterates)
        a = evaluate_residual_jacobian(problem, x)
        t0 = time.perf_counter()
        dx = solve_full_linear_system(a, -r)
        solve_times.append(time.perf_counter() - t0)
        x = x + dx
        if not np.all(np.isfinite(x)):
            raise EvaluationError("non-finite Newton iterate")
        if iterates is not None:
            iterates.append(x.copy())
        iterations += 1
        r = evaluate_residual(problem, x)
        rnorm = float(np.linalg.norm(r))
    return NewtonOutcome(x, iterations, rnorm, True, solve_times, iterates)
