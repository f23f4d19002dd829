"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration/usage problems exit 1,
data problems exit 2.
"""


class SeatradeError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(SeatradeError):
    """Bad configuration, flags, or missing input paths."""


class DataError(SeatradeError, ValueError):
    """Invalid or inconsistent data passed to an operation."""


class SchemaError(DataError):
    """Input table does not match the expected column schema."""


class RgridError(DataError):
    """Malformed raster file."""
