"""Exception types raised by the library."""


class GrazingModesError(Exception):
    """Base class for all library errors."""


class NonIntegrableError(GrazingModesError):
    """The angular cross-section has no finite momentum transfer."""


class QuadratureNotConvergedError(GrazingModesError):
    """Successive quadrature refinements disagree beyond the tolerance."""

    def __init__(self, message, estimate=None, pair=None):
        super().__init__(message)
        self.estimate = estimate
        self.pair = pair


class DomainError(GrazingModesError, ValueError):
    """An argument lies outside the domain of the operation."""


class SupportViolationError(GrazingModesError):
    """Initial data is nonzero outside the truncation ball."""


class DimensionMismatchError(GrazingModesError, ValueError):
    """Lattice sizes of state and kernel disagree."""


class BlowupError(GrazingModesError):
    """Coefficients exceeded the configured bound during time stepping."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class CacheError(GrazingModesError):
    """A cache file is missing, corrupted or does not match the request."""


class ConfigError(GrazingModesError, ValueError):
    """Invalid run configuration."""
