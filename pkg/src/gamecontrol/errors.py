"""Exception types shared across the package."""


class GameControlError(Exception):
    """Base class for all package errors."""


class InvalidInputError(GameControlError, ValueError):
    """Dimension mismatch, non-finite data or out-of-range parameter."""


class UnsupportedOperationError(GameControlError):
    """The requested operation is not available for this object."""


class NoConvergenceError(GameControlError):
    """An iterative solver hit its iteration budget.

    ``best_residual`` carries the smallest residual seen.
    """

    def __init__(self, message, best_residual=float("nan"), x_best=None):
        super().__init__(message)
        self.best_residual = best_residual
        self.x_best = x_best


class DivergedRunError(GameControlError):
    """A trajectory produced a non-finite or exploding state.

    ``last_finite_t`` is the last turn whose state was finite and bounded.
    """

    def __init__(self, message, last_finite_t):
        super().__init__(message)
        self.last_finite_t = last_finite_t


class TimescaleConditionError(InvalidInputError):
    """Step-size exponents violate the two-timescale requirements."""
