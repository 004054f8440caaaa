"""Exception hierarchy shared by all modules."""
from __future__ import annotations


class BrakeIndexError(Exception):
    """Base class for every error raised by the package."""


class NumericalError(BrakeIndexError):
    """A computation could not be completed to the requested accuracy."""


class NotSymmetric(BrakeIndexError):
    pass


class NotSymplectic(BrakeIndexError):
    pass


class AmbientMismatch(BrakeIndexError):
    pass


class DegenerateFrame(BrakeIndexError):
    pass


class DimensionMismatch(BrakeIndexError):
    pass


class StepCountTooSmall(BrakeIndexError):
    pass


class NonSymmetricCoefficient(BrakeIndexError):
    pass


class DegenerateCrossing(NumericalError):
    """A crossing form has a kernel, so its contribution is not determined."""

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time


class MissingCoefficientPath(BrakeIndexError):
    pass


class NotPositiveDefinite(NumericalError):
    pass


class DBlockNotPositive(NumericalError):
    pass


class DegenerateEndpoint(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class SingularJacobian(NumericalError):
    def __init__(self, message: str, singular_values=None):
        super().__init__(message)
        self.singular_values = singular_values


class ConfigParse(BrakeIndexError):
    pass
