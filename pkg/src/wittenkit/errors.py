"""Exception hierarchy shared by all modules."""


class WittenkitError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(WittenkitError, ValueError):
    pass


class ShapeError(WittenkitError, ValueError):
    pass


class DomainError(WittenkitError, ValueError):
    pass


class PoleError(DomainError):
    """Kernel evaluated on (or numerically at) its diagonal."""


class InfeasibleTransitionError(WittenkitError, ValueError):
    pass


class MollifierError(WittenkitError, RuntimeError):
    pass


class InvalidInteriorError(WittenkitError, ValueError):
    pass


class GluingError(InvalidInteriorError):
    pass


class ToleranceError(WittenkitError, RuntimeError):
    """A numerical procedure did not reach its requested accuracy."""

    def __init__(self, message, achieved=None):
        super().__init__(message if achieved is None else f"{message} (achieved {achieved:.3e})")
        self.achieved = achieved


class VerificationError(WittenkitError, RuntimeError):
    """A verified identity or bound missed its tolerance."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class InvalidSpectrumError(WittenkitError, ValueError):
    pass
