"""Exception types shared across the toolkit."""


class FieldRankError(Exception):
    """Base class for every error this package raises on purpose."""


class ShapeError(FieldRankError):
    """Operands have incompatible dimensions."""


class ConfigError(FieldRankError):
    """A configuration value is invalid or inconsistent."""


class UsageError(FieldRankError):
    """An operation was invoked in an invalid state or with invalid arguments."""


class NumericError(FieldRankError):
    """A computation produced or encountered non-finite values."""


class ParseError(FieldRankError):
    """An input file could not be parsed."""


class EvaluationError(FieldRankError):
    """An evaluation request is degenerate (empty or too small)."""


class BundleError(FieldRankError):
    """An output bundle is missing files or is internally inconsistent."""
