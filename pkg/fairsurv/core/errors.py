"""
Exception hierarchy.

DataError and ConfigError are usage/IO failures (CLI exit code 2); every other
FairSurvError is a computation failure (exit code 1).
"""
from typing import Optional, Sequence


class FairSurvError(Exception):
    """Base exception for all fairsurv errors."""
    pass


class ConfigError(FairSurvError):
    """Raised when a config file is missing, unparseable or invalid."""
    pass


class DataError(FairSurvError):
    """Base class for dataset ingestion and validation problems."""
    pass


class SchemaError(DataError):
    """Raised when a CSV lacks a column required by the schema."""

    def __init__(self, column: str, path: Optional[str] = None):
        self.column = column
        where = f" in {path}" if path else ""
        super().__init__(f"Missing column '{column}'{where}")


class DataParseError(DataError):
    """Raised when a cell cannot be parsed as a number."""

    def __init__(self, row: int, column: str, value: object):
        self.row = row
        self.column = column
        super().__init__(f"Row {row}, column '{column}': cannot parse {value!r} as a number")


class DataValidationError(DataError):
    """Raised when data violates a dataset invariant."""

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        prefix = f"Row {row}: " if row is not None else ""
        super().__init__(prefix + message)


class DimensionMismatchError(FairSurvError):
    """Raised when feature counts of a model/scaler and a dataset differ."""

    def __init__(self, expected: int, got: int, what: str = "features"):
        self.expected = expected
        self.got = got
        super().__init__(f"Dimension mismatch: expected {expected} {what}, got {got}")


class FoldSplitError(FairSurvError):
    """Raised when a dataset cannot be split into the requested folds."""
    pass


class UndefinedLikelihoodError(FairSurvError):
    """Raised when the partial likelihood is undefined (no observed events)."""
    pass


class MetricUndefinedError(FairSurvError):
    """Raised when a metric has no admissible pairs/points to average over."""
    pass


class NonFiniteLossError(FairSurvError):
    """Raised when training produces a non-finite loss or gradient."""

    def __init__(self, epoch: int, batch_id: int, beta: Sequence[float], value: float):
        self.epoch = epoch
        self.batch_id = batch_id
        self.beta = list(beta)
        self.value = value
        super().__init__(
            f"Non-finite loss {value} at epoch {epoch}, batch {batch_id}; last beta={self.beta}"
        )


class GridCellError(FairSurvError):
    """Raised when one (gamma, k, fold) cell of a grid search fails."""

    def __init__(self, gamma: float, k: int, fold: int, cause: BaseException):
        self.gamma = gamma
        self.k = k
        self.fold = fold
        self.cause = cause
        super().__init__(f"Cell gamma={gamma:g}, k={k}, fold={fold} failed: {cause}")
