"""Exception types shared across the package."""


class FiberedDynError(Exception):
    """Base class for numerical failures raised by this package."""


class NonConvergence(FiberedDynError, ArithmeticError):
    """Iterative solver hit its cap with residual above tolerance."""

    def __init__(self, message, unconverged=0):
        super().__init__(message)
        self.unconverged = unconverged


class DegenerateInput(FiberedDynError, ValueError):
    pass


class DegenerateFiber(FiberedDynError):
    pass


class ToleranceUnreachable(FiberedDynError):
    pass


class SingularSample(FiberedDynError):
    """Too many sample points fell on a critical zero of the integrand."""

    def __init__(self, message, dropped=0, total=0):
        super().__init__(message)
        self.dropped = dropped
        self.total = total


class InvalidMap(FiberedDynError, ValueError):
    """A map failed validation and cannot be used downstream."""
