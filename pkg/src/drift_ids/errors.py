"""Exception hierarchy shared across the package."""


class DriftIdsError(Exception):
    """Base class for all errors raised by drift-ids."""


class DimensionError(DriftIdsError):
    """Array shapes are inconsistent with the operation's contract."""


class NumericError(DriftIdsError):
    """A value that must be finite is NaN or infinite."""


class ParameterError(DriftIdsError):
    """A hyperparameter or argument is outside its legal range."""


class ContractError(DriftIdsError):
    """An API was used out of sequence or with mismatched structures."""


class ConfigError(DriftIdsError):
    """An experiment/model configuration is invalid."""


class DataError(DriftIdsError):
    """Input data is empty, malformed, or degenerate."""


class SchemaError(DataError):
    """A file does not conform to its documented schema."""


class UndefinedMetricError(DriftIdsError):
    """A metric is mathematically undefined on the given input."""
