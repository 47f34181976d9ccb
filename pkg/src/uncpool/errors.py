"""Exception types shared across the package."""


class UncpoolError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(UncpoolError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class ComputationError(UncpoolError, RuntimeError):
    """A numerical computation produced an invalid (non-finite) result."""


class ParseError(UncpoolError, ValueError):
    """Malformed input data. Carries the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
