"""Exception hierarchy shared by all wkernel modules."""


class WkernelError(Exception):
    """Base class for all wkernel errors."""


class InvalidInput(WkernelError, ValueError):
    """Malformed or inconsistent input (shape mismatch, NaN, bad range)."""


class NotPSD(WkernelError):
    """A matrix required to be positive semidefinite is not."""


class SingularInformation(WkernelError):
    """An information (metric) matrix is singular or not positive definite."""


class NumericalFailure(WkernelError):
    """An iterative numerical routine failed to converge."""


class Unsupported(WkernelError):
    """Operation is not available for the given model or configuration."""


class ParseError(WkernelError):
    """A data file could not be parsed; carries row/column location."""

    def __init__(self, message, path=None, row=None, col=None):
        loc = []
        if path is not None:
            loc.append(str(path))
        if row is not None:
            loc.append(f"row {row}")
        if col is not None:
            loc.append(f"col {col}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.path = path
        self.row = row
        self.col = col


class UsageError(WkernelError):
    """Bad command-line usage (unknown command, missing argument)."""


class ConvergenceWarning(UserWarning):
    """Non-fatal warning: a sampler finished in a suspicious state."""
