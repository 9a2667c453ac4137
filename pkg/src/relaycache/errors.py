"""Exception types shared across the package."""


class ValidationError(ValueError):
    """An argument or configuration field is outside its valid domain."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class NumericError(RuntimeError):
    """A numerical routine failed to converge or produced a non-finite value."""


class DegenerateDistributionError(NumericError):
    """A weighted density has a zero (or non-finite) normalizing constant."""


class InvalidStateError(RuntimeError):
    pass


class ContractViolation(RuntimeError):
    """A caller-supplied function broke an assumption (e.g. monotonicity)."""
