"""Exception hierarchy shared by all modules."""


class SandpileError(Exception):
    """Base class for every error raised by sandpile1d."""


class InsufficientWindow(SandpileError):
    """A read or scan left the stored window and the tail cannot answer it."""


class NotOrdered(SandpileError):
    """Two configurations were expected to satisfy lower <= upper pointwise."""


class InvalidSite(SandpileError):
    """A lattice site is outside the allowed range or has the wrong height."""


class InvalidGrainField(SandpileError):
    """A grain field has a zero entry where at least one grain is required."""


class SizeLimit(SandpileError):
    """The requested volume exceeds the dense enumeration cap."""


class RadiusExceeded(SandpileError):
    """The requested time lies outside the convergence radius of the series."""


class DepthLimit(SandpileError):
    """The series needs more generator iterates than the configured cap allows."""

    def __init__(self, required, cap):
        self.required = required
        self.cap = cap
        super().__init__(
            f"series needs {required} generator iterates but the depth cap is {cap}"
        )


class NumericalFailure(SandpileError):
    """A linear-algebra solve did not meet its residual tolerance."""
