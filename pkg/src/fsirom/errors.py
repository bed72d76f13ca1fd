"""Exception hierarchy."""

import numpy as np


class FsiromError(Exception):
    """Base class for all package errors."""


class ConfigError(FsiromError, ValueError):
    """Invalid or inconsistent configuration."""


class DimensionError(FsiromError, ValueError):
    """Array sizes do not match."""


class PreconditionError(FsiromError, ValueError):
    """Input violates an operation's precondition."""


class SolverFailure(FsiromError, RuntimeError):
    """A numerical solver did not converge."""

    def __init__(self, message, residual_norm=None):
        super().__init__(message)
        self.residual_norm = residual_norm


class OutOfRangeError(FsiromError, ValueError):
    """Load outside the validity range of the solid model."""

    def __init__(self, message, cell=None, pressure=None):
        super().__init__(message)
        self.cell = cell
        self.pressure = pressure


class IntegrationBlowup(FsiromError, RuntimeError):
    """ODE state became non-finite."""

    def __init__(self, message, time_reached):
        super().__init__(message)
        self.time_reached = time_reached


class StepFailure(SolverFailure):
    """Coupling subiterations exhausted without convergence."""

    def __init__(self, message, step=None, residual_history=()):
        hist = list(residual_history)
        super().__init__(message, hist[-1] if hist else None)
        self.step = step
        self.residual_history = hist


class RankError(FsiromError, ValueError):
    """Requested more POD modes than the snapshot data supports."""

    def __init__(self, message, effective_rank):
        super().__init__(message)
        self.effective_rank = effective_rank


class IllConditionedError(FsiromError, np.linalg.LinAlgError):
    """Regression system is singular or numerically unusable."""


class AlignmentError(FsiromError, ValueError):
    """Force and displacement snapshots are not paired column by column."""
