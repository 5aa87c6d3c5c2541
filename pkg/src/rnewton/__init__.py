"""POD-reduced Newton-like solver for implicit Euler time integration.

The package provides the full-order Newton baseline, the Newton-like solver
whose linear step is solved in a POD subspace with full-order fallback, the
time-stepping driver, and a compositional porous-media flow model as the
flagship stiff benchmark.
"""

__version__ = "0.1.0"

from .errors import (EvaluationError, InfeasibleStateError, LinearSolveError,
                     RnewtonError, SimulationAbort)
from .ode import (OdeSystem, PiecewiseConstantSignal, ResidualProblem,
                  evaluate_residual, evaluate_residual_jacobian)
from .newton import (NewtonOutcome, NewtonSettings, default_tolerance,
                     newton_solve, solve_full_linear_system)
from .pod import (DEFAULT_POD_THRESHOLD, ProjectionBasis, SnapshotMatrix,
                  build_snapshot_matrix, compute_pod_basis)
from .reduced import NewtonLikeOutcome, newton_like_solve, reduced_newton_step
from .driver import (DriverSettings, SimulationResult, SolveReport, TimeGrid,
                     default_driver_settings, load_trajectory_binary,
                     load_trajectory_csv, simulate)

__all__ = [
    "EvaluationError", "InfeasibleStateError", "LinearSolveError",
    "RnewtonError", "SimulationAbort",
    "OdeSystem", "PiecewiseConstantSignal", "ResidualProblem",
    "evaluate_residual", "evaluate_residual_jacobian",
    "NewtonOutcome", "NewtonSettings", "default_tolerance", "newton_solve",
    "solve_full_linear_system",
    "DEFAULT_POD_THRESHOLD", "ProjectionBasis", "SnapshotMatrix",
    "build_snapshot_matrix", "compute_pod_basis",
    "NewtonLikeOutcome", "newton_like_solve", "reduced_newton_step",
    "DriverSettings", "SimulationResult", "SolveReport", "TimeGrid",
    "default_driver_settings", "load_trajectory_binary", "load_trajectory_csv",
    "simulate",
]
