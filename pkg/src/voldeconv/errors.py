"""Exception types shared across the package."""


class NotFoundError(LookupError):
    """A named resource (e.g. a builtin kernel) does not exist."""


class NumericalFailure(ArithmeticError):
    """A numerical routine could not meet its accuracy contract.

    Carries the offending residual so callers can report it.
    """

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class RangeError(ValueError):
    """An argument is outside the representable / supported range."""


class DomainError(ValueError):
    """An argument is outside the mathematical domain of the operation."""


class ConfigError(ValueError):
    """Inconsistent or invalid configuration."""


class InputError(ValueError):
    """Malformed or insufficient input data."""
