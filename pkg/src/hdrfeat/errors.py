"""Exception types shared by every hdrfeat module."""


class HdrFeatError(Exception):
    """Base class for library errors."""


class ParameterError(HdrFeatError, ValueError):
    """An argument is outside its documented domain."""


class DataError(HdrFeatError, ValueError):
    """Input data violates an invariant (NaN pixels, bad labels, ...)."""


class FormatError(DataError):
    """A file is not in one of the supported formats."""


class ConfigurationError(HdrFeatError):
    """A benchmark run is misconfigured; raised before any compute starts."""
