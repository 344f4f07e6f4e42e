"""Exception hierarchy shared across the package."""


class MsWienerError(Exception):
    """Base class for all package errors."""


class ConfigError(MsWienerError):
    """Invalid or conflicting configuration (CLI exit code 2)."""


class DataError(MsWienerError):
    """Unreadable, malformed or missing input data (CLI exit code 3)."""


class NumericError(MsWienerError):
    """Non-finite values or numeric breakdown inside the pipeline (CLI exit code 4)."""


class CoverageError(NumericError):
    """A block plan left at least one pixel without window coverage."""
