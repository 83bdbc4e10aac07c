"""Exception hierarchy shared by all estimation modules."""


class CovarError(Exception):
    """Base class for library errors."""


class DomainError(CovarError, ValueError):
    """Argument outside the admissible domain."""


class NumericError(CovarError, ArithmeticError):
    """A numerical routine failed to reach its tolerance."""

    def __init__(self, message: str, achieved: float | None = None):
        super().__init__(message)
        self.achieved = achieved


class NoSolutionError(CovarError):
    """The adjustment-factor equation has no root in the admissible bracket."""


class BracketExceededError(NoSolutionError):
    """A root exists only with the tail-function argument above one."""


class FitError(CovarError):
    """An optimiser did not converge; carries the best point seen."""

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best
