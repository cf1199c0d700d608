"""Exception hierarchy."""


class CovBracketError(Exception):
    """Base class for all package errors."""


class ValidationError(CovBracketError, ValueError):
    """Input failed validation before any computation."""


class DimensionMismatch(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class UnsupportedSpec(ValidationError):
    pass


class IndexOutOfRange(ValidationError, IndexError):
    pass


class LengthMismatch(ValidationError):
    pass


class OutOfWindow(ValidationError):
    pass


class ConfigError(ValidationError):
    """Malformed run configuration; ``location`` names the field or line."""

    def __init__(self, message, location=None):
        super().__init__(message if location is None else f"{location}: {message}")
        self.location = location


class InvariantError(CovBracketError):
    """A structural or numerical invariant does not hold."""


class NonAntisymmetric(InvariantError):
    pass


class EmptyFinalManifold(InvariantError):
    pass


class NoConvergence(InvariantError):
    pass


class DegenerateWithoutConnection(InvariantError):
    pass


class InconsistentCovector(InvariantError):
    pass


class GaugeVariantObservable(InconsistentCovector):
    pass


class NotGauge(InvariantError):
    pass


class KernelMismatch(InvariantError):
    pass


class MissingProjector(InvariantError):
    pass


class NotHorizontal(InvariantError):
    pass


class CrossCheckFailed(InvariantError):
    pass


class NonDiagonalizable(UserWarning):
    """Spectral flow unavailable; a leapfrog fallback was used."""
