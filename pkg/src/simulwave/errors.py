"""Exception hierarchy shared by every module and mapped to CLI exit codes."""


class SimulwaveError(Exception):
    """Base class for all package errors."""


class ValidationError(SimulwaveError, ValueError):
    """Input violates a documented precondition or type invariant."""


class NumericalError(SimulwaveError, ArithmeticError):
    """A numerical procedure failed on otherwise valid input."""


class ConvergenceError(NumericalError):
    """An iterative method did not reach its tolerance."""
