"""Exception types shared across the package."""


class OtaggError(Exception):
    """Base class for all package errors."""


class FormatError(OtaggError):
    """A byte stream or document does not conform to its file format."""


class ConfigError(OtaggError):
    """A configuration, parameter bundle, or input value is invalid."""


class DimensionError(OtaggError):
    """Array shapes or sizes are inconsistent with the requested operation."""


class DegenerateError(OtaggError):
    """The computation has no defined result for this input (e.g. zero norm)."""
