"""ODE system abstraction and the implicit-Euler residual.

A system is ``xdot = f(x, u, d)`` with model parameters owned by the system
instance.  One implicit-Euler step solves the nonlinear residual

    R(x_next) = x_next - x_k - f(x_next, u_k, d_k) * dt = 0

whose Jacobian is ``I - df/dx * dt``.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import EvaluationError


class OdeSystem(ABC):
    """Right-hand side ``f`` and its sparse Jacobian for a fixed-size state.

    Implementations must be deterministic functions of their arguments and
    keep a fixed Jacobian sparsity pattern across evaluations.  Model
    parameters are instance state.
    """

    n_x: int

    @abstractmethod
    def rhs(self, x: np.ndarray, u: np.ndarray, d: np.ndarray) -> np.ndarray:
        """Evaluate ``f(x, u, d)``, shape ``(n_x,)``."""

    @abstractmethod
    def jacobian(self, x: np.ndarray, u: np.ndarray, d: np.ndarray) -> sp.csc_matrix:
        """Evaluate ``df/dx`` as a CSC matrix with a fixed pattern."""


@dataclass(frozen=True)
class PiecewiseConstantSignal:
    """Zero-order-hold signal: value ``values[k]`` on ``[breakpoints[k], breakpoints[k+1])``."""

    breakpoints: np.ndarray  # strictly increasing, length N+1, seconds
    values: np.ndarray       # shape (N, dim) or (N,)

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if bp.ndim != 1 or bp.size < 2:
            raise ValueError("need at least two breakpoints")
        if not np.all(np.diff(bp) > 0):
            raise ValueError("breakpoints must be strictly increasing")
        if vals.shape[0] != bp.size - 1:
            raise ValueError("need one value per interval")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    def value_at(self, t: float) -> np.ndarray:
        """Value on the interval containing ``t`` (half-open on the right)."""
        bp = self.breakpoints
        if not (bp[0] <= t < bp[-1]):
            raise ValueError(f"t={t} outside signal domain [{bp[0]}, {bp[-1]})")
        k = int(np.searchsorted(bp, t, side="right")) - 1
        return np.atleast_1d(self.values[k])

    @classmethod
    def constant(cls, value, t0: float = 0.0) -> "PiecewiseConstantSignal":
        """Signal holding ``value`` on ``[t0, inf)``."""
        v = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(np.array([t0, np.inf]), v[None, :])


EMPTY_SIGNAL = PiecewiseConstantSignal.constant(np.zeros(0))


@dataclass
class ResidualProblem:
    """One implicit-Euler step's nonlinear system, frozen at (x_k, u_k, d_k, dt)."""

    system: OdeSystem
    x_k: np.ndarray
    u_k: np.ndarray = field(default_factory=lambda: np.zeros(0))
    d_k: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dt: float = 1.0

    def __post_init__(self):
        self.x_k = np.asarray(self.x_k, dtype=float)
        if self.x_k.shape != (self.system.n_x,):
            raise ValueError(f"x_k has shape {self.x_k.shape}, expected ({self.system.n_x},)")
        if not self.dt > 0:
            raise ValueError("dt must be positive")


def _require_dim(x: np.ndarray, n_x: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (n_x,):
        raise ValueError(f"state has shape {x.shape}, expected ({n_x},)")
    return x


def evaluate_residual(problem: ResidualProblem, x_next: np.ndarray) -> np.ndarray:
    """``x_next - x_k - f(x_next, u_k, d_k) * dt``; fails fast on non-finite output."""
    x_next = _require_dim(x_next, problem.system.n_x)
    f = problem.system.rhs(x_next, problem.u_k, problem.d_k)
    r = x_next - problem.x_k - f * problem.dt
    if not np.all(np.isfinite(r)):
        raise EvaluationError("non-finite residual")
    return r


_identity_cache: dict[int, sp.csc_matrix] = {}


def evaluate_residual_jacobian(problem: ResidualProblem, x_next: np.ndarray) -> sp.csc_matrix:
    """``I - df/dx * dt`` in CSC form; the diagonal is structurally present.

    Systems may provide a fused ``residual_jacobian(x, u, d, dt)`` evaluator
    (returning None to decline); otherwise the matrix is formed from the
    plain Jacobian.
    """
    x_next = _require_dim(x_next, problem.system.n_x)
    n = problem.system.n_x
    a = None
    fused = getattr(problem.system, "residual_jacobian", None)
    if fused is not None:
        a = fused(x_next, problem.u_k, problem.d_k, problem.dt)
    if a is None:
        jf = problem.system.jacobian(x_next, problem.u_k, problem.d_k).tocsc()
        if n not in _identity_cache:
            _identity_cache[n] = sp.identity(n, format="csc")
        a = (jf * (-problem.dt) + _identity_cache[n]).tocsc()
    if not np.all(np.isfinite(a.data)):
        raise EvaluationError("non-finite residual Jacobian")
    return a


def finite_difference_jacobian(fun, x: np.ndarray, h_scale: float | None = None) -> np.ndarray:
    """Central-difference Jacobian of ``fun`` at ``x``.

    Step per coordinate: ``h = cbrt(machine eps) * max(1, |x_i|)``, the
    usual balance of truncation and rounding error for central differences.
    Used as the independent oracle for analytic Jacobians.
    """
    x = np.asarray(x, dtype=float)
    h0 = h_scale if h_scale is not None else float(np.cbrt(np.finfo(float).eps))
    f0 = np.asarray(fun(x), dtype=float)
    jac = np.empty((f0.size, x.size))
    for i in range(x.size):
        h = h0 * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        jac[:, i] = (np.asarray(fun(xp)) - np.asarray(fun(xm))) / (2.0 * h)
    return jac
