"""Exception hierarchy shared by all modules.

``ValidationError`` subclasses signal bad inputs (CLI exit code 1);
``NumericalError`` subclasses signal a computation that could not finish
(CLI exit code 2).
"""


class BernoulliDiffuseError(Exception):
    pass


class ValidationError(BernoulliDiffuseError, ValueError):
    pass


class ContractError(ValidationError):
    """An operation was called on data violating its precondition."""


class DomainError(ValidationError):
    pass


class UnsupportedError(ValidationError):
    pass


class PreconditionError(ValidationError):
    pass


class NumericalError(BernoulliDiffuseError, ArithmeticError):
    pass


class SingularityError(NumericalError):
    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class InstabilityError(NumericalError):
    pass


class StabilityError(NumericalError):
    """Explicit step refused because dt exceeds the stability bound."""

    def __init__(self, message, dt=None, dt_max=None, partial=None):
        super().__init__(message)
        self.dt = dt
        self.dt_max = dt_max
        self.partial = partial


class ConvergenceError(NumericalError):
    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []
