"""Exception hierarchy.

ValidationError subclasses signal bad inputs or configs (CLI exit code 2);
everything else under GsdaError is a runtime failure (CLI exit code 3).
"""


class GsdaError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(GsdaError):
    """Precondition violation: bad argument, config, or input file."""


class ParseError(ValidationError):
    """A file could not be parsed in the declared format."""


class VersionMismatchError(ParseError):
    """Model file has a wrong magic string or unsupported version."""


class EmptyCloudError(ValidationError):
    """Operation needs at least one point."""


class TooFewPointsError(ValidationError):
    """Cloud has fewer points than the operation requires."""


class UnknownClassError(ValidationError):
    """Shape class name is not one of the known generators."""


class KTooLargeError(ValidationError):
    """k-NN parameter must satisfy 1 <= k <= n - 1."""


class DimensionMismatchError(ValidationError):
    """Array has the wrong shape for the operation."""


class SizeMismatchError(ValidationError):
    """Paired inputs must have the same number of points."""


class BadCountError(ValidationError):
    """A count argument is out of range."""


class BandRangeError(ValidationError):
    """Frequency band bounds are out of range or reversed."""


class ConfigError(ValidationError):
    """A config dataclass carries an invalid field value."""


class ConvergenceError(GsdaError):
    """An iterative numerical routine failed to converge."""
