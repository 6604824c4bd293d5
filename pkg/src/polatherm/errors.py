"""Exception hierarchy shared by all modules."""


class PolathermError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(PolathermError):
    """Bad units, unknown keys or malformed input documents."""


class DomainError(PolathermError, ValueError):
    """Arguments outside the physical domain of an operation."""


class NumericError(PolathermError, ArithmeticError):
    """A numerical procedure failed to converge or produced garbage."""


class ExtractionError(PolathermError):
    """Spectral analysis could not recover the requested quantity."""


class IntegrationError(NumericError):
    """ODE integration produced NaN or negative occupations."""


class SearchError(NumericError):
    """Bracketing search found no crossing in the given interval."""
