"""Exception hierarchy shared by all modules."""


class WignerShrinkError(Exception):
    """Base class for all package errors."""


class ValidationError(WignerShrinkError, ValueError):
    """Invalid input: bad dimensions, malformed files, unsupported names."""


class NumericalError(WignerShrinkError, RuntimeError):
    """A numerical procedure failed to converge."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class OutOfSupportError(NumericalError):
    """Evaluation point lies outside the numerical support of the limiting
    spectral density.  Callers decide the fallback (e.g. nearest in-support
    point)."""
