"""Error types shared across the package.

The CLI maps these onto distinct exit codes, so keep the hierarchy flat
and predictable: configuration problems, malformed files, and runtime
misuse each get their own class.
"""


class ConfigError(ValueError):
    """A configuration value is missing, malformed, or out of range."""


class DataFormatError(RuntimeError):
    """A binary container or checkpoint file cannot be parsed."""


class TruncatedFileError(DataFormatError):
    """File ends before the payload announced in its header."""


class SchemaVersionError(DataFormatError):
    """File was written with an unsupported schema version."""


class EpisodeFinishedError(RuntimeError):
    """step() was called on an episode that already ran its last slot."""


class SearchBudgetError(RuntimeError):
    """Exhaustive search space exceeds the configured budget."""


class EmptySampleError(ValueError):
    """An operation that needs at least one sample received none."""
