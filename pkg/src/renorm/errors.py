"""Exception types raised by the renormalization engine."""


class RenormError(Exception):
    """Base class for engine errors."""


class UnsupportedSetError(RenormError, ValueError):
    """The singular set has no transverse split or is outside the supported range."""


class InsufficientOrder(RenormError, ValueError):
    """A test function cannot supply derivatives of the requested order."""


class DivergentConfiguration(RenormError, ValueError):
    """The subtraction order is too low for the kernel's growth."""

    def __init__(self, message, required_order=None):
        super().__init__(message)
        self.required_order = required_order


class QuadratureFailure(RenormError, RuntimeError):
    """Adaptive quadrature did not reach its tolerance within budget."""

    def __init__(self, message, value=None, error=None):
        super().__init__(message)
        self.value = value
        self.error = error


class NotLocallyFinite(RenormError, RuntimeError):
    """Partial sums of a positive extension do not stay bounded."""

    diagnostic = "not locally finite"

    def __init__(self, message, partial_sums=()):
        super().__init__(f"{self.diagnostic}: {message}")
        self.partial_sums = list(partial_sums)
