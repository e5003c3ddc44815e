"""Exception types shared across the package."""


class GaitError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(GaitError):
    """Malformed input file. Carries a 1-based line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyInputError(ParseError):
    """Input stream contained no data rows."""


class ValidationError(GaitError):
    """Data violates a structural invariant (negative force, bad timestamps, ...)."""


class DomainError(GaitError, ValueError):
    """Arguments outside an operation's domain (bad shapes, thresholds, labels, ...)."""


class TrialRejected(GaitError):
    """Trial cannot support feature extraction (too few complete gait cycles)."""


class NumericalError(GaitError):
    """Optimization produced non-finite values."""
