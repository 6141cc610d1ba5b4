"""Exception hierarchy shared by all jflow modules."""


class JFlowError(Exception):
    """Base class for every error raised by jflow."""


class DimensionError(JFlowError, ValueError):
    """Argument shapes or dimensions do not match."""


class DegeneracyError(JFlowError, ArithmeticError):
    """A quantity that must be non-zero (e.g. a volume) vanished."""


class UnsupportedDimensionError(JFlowError):
    """The operation is only defined for a specific complex dimension."""


class DomainError(JFlowError, ValueError):
    """Inputs lie outside the domain where a formula is defined."""


class ConstraintError(JFlowError, ValueError):
    """An admissibility flag of a piecewise-linear profile is violated."""


class NoDestabilizerError(JFlowError):
    """Requested a destabilizing object in a case where none exists."""


class SingularityError(JFlowError):
    """Convexity was lost (a Hessian became degenerate) during a computation."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class StepSizeError(JFlowError):
    """An explicit time step violates the stability bound."""


class DivergenceError(JFlowError):
    """An iterative solver failed to converge."""

    def __init__(self, message, last_residual=None):
        super().__init__(message)
        self.last_residual = last_residual


class ContinuationError(JFlowError):
    """Continuation could not proceed even at the minimum step."""


class ConfigError(JFlowError, ValueError):
    """Malformed or semantically invalid run configuration."""

    def __init__(self, message, line=None, key=None):
        if line is not None:
            message = f"line {line}: {message}"
        elif key is not None:
            message = f"{key}: {message}"
        super().__init__(message)
        self.line = line
        self.key = key


class PreconditionError(JFlowError, ValueError):
    """An input violates a documented precondition (e.g. convexity)."""
