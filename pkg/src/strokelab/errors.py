"""Exception hierarchy shared across the package.

Library code raises these instead of calling sys.exit; the command line
front end maps them onto process exit codes.
"""


class StrokeLabError(Exception):
    """Base class for all failures this package raises deliberately."""


class DataError(StrokeLabError):
    """Unreadable, malformed, or schema-violating input data."""


class UnseenCategoryError(DataError):
    """A fitted encoder met a category absent from its training table."""


class ConvergenceError(StrokeLabError):
    """An optimizer produced a non-finite objective or gradient."""


class ConfigError(StrokeLabError):
    """A configuration file or override could not be interpreted."""


class ReportError(StrokeLabError):
    """Report files could not be written or read back."""
