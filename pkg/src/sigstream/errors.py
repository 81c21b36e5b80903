"""Exception hierarchy shared across the toolkit.

The CLI maps these onto process exit codes: ConfigError -> 2,
DataError -> 3, NumericalError -> 4.
"""


class SigstreamError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(SigstreamError):
    """Invalid configuration value or malformed config file."""


class DataError(SigstreamError):
    """Dataset content cannot satisfy the requested operation."""


class FormatError(DataError):
    """A file does not conform to one of the binary or CSV formats."""


class NumericalError(SigstreamError):
    """Optimization produced non-finite values or failed structurally."""
