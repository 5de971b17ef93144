"""Error types shared across the package.

All inherit from ValueError so callers that do not care about the
distinction can catch one base class.
"""


class ParameterError(ValueError):
    """An argument violates a documented precondition."""


class DataError(ValueError):
    """Input data is numerically unusable (NaN/inf, wrong dtype domain)."""


class FormatError(ValueError):
    """A serialized artifact (file, header) is malformed."""


class ConfigurationError(ValueError):
    """A configuration is internally inconsistent or unsupported."""
