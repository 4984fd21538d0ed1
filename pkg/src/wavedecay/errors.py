"""Exception types shared across the package."""


class WavedecayError(Exception):
    """Base class for all package errors."""


class ValidationError(WavedecayError):
    """A configuration or argument is inconsistent or out of range."""


class DomainError(ValidationError):
    """A coordinate lies outside the background's domain (e.g. r <= 2M)."""


class CoverageError(WavedecayError):
    """A requested leaf or region is not covered by the grid.

    Raised instead of silently returning an incomplete flux.
    """


class NumericalError(WavedecayError):
    """NaN/overflow detected during evolution or in an output artifact."""
