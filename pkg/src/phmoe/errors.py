"""Exception hierarchy shared by the package."""


class PhMoeError(Exception):
    """Base class for all package errors."""


class NumericalError(PhMoeError, ArithmeticError):
    """A numerical routine failed (singular matrix, eigen-solver failure, ...)."""


class DegenerateObservationError(NumericalError):
    """An observation has zero (or underflowing) likelihood under the model."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class InfiniteMeanError(NumericalError):
    """The requested mean does not exist (heavy tail with index >= 1)."""


class SchemaError(PhMoeError, ValueError):
    """Covariate schema or dataset does not match what was expected."""

    def __init__(self, message, column=None, row=None):
        super().__init__(message)
        self.column = column
        self.row = row
