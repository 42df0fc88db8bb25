"""Exception hierarchy shared across the package."""


class TempRelError(Exception):
    """Base class for all package errors."""


class SchemaError(TempRelError):
    """Unknown relation identifier or an inconsistent relation schema."""


class InputError(TempRelError):
    """Caller passed arguments that violate an operation's contract."""


class DataError(TempRelError):
    """A record in a data file is malformed or a lookup key is missing."""


class FormatError(TempRelError):
    """A file's structure is invalid (duplicate ids, ragged widths, ...)."""


class ConfigError(TempRelError):
    """Inconsistent model or training configuration (width mismatch, ...)."""


class DivergenceError(TempRelError):
    """Training produced a non-finite loss."""
