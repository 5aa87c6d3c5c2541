"""Exception types shared across the solver stack."""


class RnewtonError(Exception):
    """Base class for all rnewton failures."""


class EvaluationError(RnewtonError):
    """A model evaluation produced non-finite values or was called outside
    its domain of definition."""


class InfeasibleStateError(EvaluationError):
    """A state left the physical domain of the thermodynamic model
    (e.g. nonpositive oil volume, molar volume below the covolume)."""


class LinearSolveError(RnewtonError):
    """A linear system was structurally or numerically singular."""


class SimulationAbort(RnewtonError):
    """A time step failed after all fallbacks.

    Carries the partial trajectory accepted so far and a diagnostic of the
    failing step.
    """

    def __init__(self, message, partial_trajectory, reports, step_index):
        super().__init__(message)
        self.partial_trajectory = partial_trajectory
        self.reports = reports
        self.step_index = step_index
