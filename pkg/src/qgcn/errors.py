"""Exception taxonomy shared across the package.

The CLI maps these onto distinct exit codes, so keep the hierarchy flat
and raise the most specific class available.
"""


class QgcnError(Exception):
    """Base class for all errors raised by this package."""


class GraphError(QgcnError):
    """Malformed graph: bad endpoints, self-loops, inconsistent edges."""


class ShapeError(QgcnError):
    """Operands whose shapes do not conform."""


class NumericFault(QgcnError):
    """NaN/Inf encountered where finite values are required."""


class LabelError(QgcnError):
    """Class label outside the configured range."""


class ConfigError(QgcnError):
    """Invalid or inconsistent configuration."""


class DataError(QgcnError):
    """Dataset ingestion or parsing failure."""


class CheckpointError(QgcnError):
    """Unreadable, corrupted, or version-incompatible checkpoint."""


class AggregateFailure(QgcnError):
    """Every repeat of a multi-run experiment failed."""
