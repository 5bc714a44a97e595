"""Exception types."""


class GkpError(Exception):
    """Base class for library errors."""


class DomainError(GkpError, ValueError):
    """Argument outside the domain of an operation."""


class DimensionError(GkpError, ValueError):
    """Incompatible matrix or vector dimensions."""


class ValidationError(GkpError, ValueError):
    """Input fails a structural check (symplecticity, integrality, ...)."""


class NumericalError(GkpError, ArithmeticError):
    """Ill-conditioned or failed numerical step."""


class ConvergenceError(NumericalError):
    """Iterative routine did not meet its tolerance within budget."""


class TruncationError(NumericalError):
    """Integer sum range exceeds its configured cap."""


class ReductionError(NumericalError):
    """Reduction to canonical form failed its reconstruction check."""
