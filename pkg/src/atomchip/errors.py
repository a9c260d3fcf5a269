"""Exception types shared across the package."""


class AtomChipError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(AtomChipError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class WireFieldSingularityError(AtomChipError):
    """Field evaluation requested inside a wire exclusion zone."""


class SearchError(AtomChipError):
    """A numerical search (minimization, profile scan) failed to converge."""


class SaddleError(SearchError):
    """A minimizer converged onto a stationary point that is not a minimum."""


class TrackingError(SearchError):
    """Well continuation jumped to a different well between adjacent phases."""


class SamplingError(AtomChipError):
    """Thermal sampling failed (e.g. Metropolis acceptance collapsed)."""


class StatisticsError(AtomChipError):
    """Too few surviving atoms for the requested estimator."""


class ConfigurationError(AtomChipError):
    """A run configuration violates a stability or consistency precondition."""


class SceneError(AtomChipError):
    """A scene file failed parsing or validation; message carries the key path."""
