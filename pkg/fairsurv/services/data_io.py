"""
Dataset ingestion and preparation.

CSV is the only ingestion format. A DatasetSchema maps column names to roles
(time, event, features); nothing is inferred. Missing cells are a hard error.

Also provides the leakage-safe preparation steps used by every experiment:
z-score scaling fit on training folds, event-stratified k-fold assignment and
seeded subsampling before O(n^2) similarity construction.
"""
from __future__ import annotations

import logging
import os
import tempfile
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from sklearn.preprocessing import StandardScaler

from fairsurv.core.config import DatasetSchema
from fairsurv.core.errors import (
    DataParseError,
    DataValidationError,
    FoldSplitError,
    SchemaError,
)
from fairsurv.models.dataset import FeatureScaler, FoldAssignment, SurvivalDataset
from fairsurv.models.report import CSVSheet

logger = logging.getLogger(__name__)


# --------------------------------------------------------------------------- #
#  CSV                                                                         #
# --------------------------------------------------------------------------- #

def _numeric_column(frame: pd.DataFrame, column: str) -> np.ndarray:
    raw = frame[column]
    empty = raw.str.strip() == ""
    if empty.any():
        row = int(np.flatnonzero(empty.to_numpy())[0])
        raise DataParseError(row, column, raw.iloc[row])
    parsed = pd.to_numeric(raw, errors="coerce")
    bad = parsed.isna().to_numpy()
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise DataParseError(row, column, raw.iloc[row])
    # float() on the original text gives correctly rounded values, so a
    # save/load cycle reproduces the stored doubles exactly.
    return np.array([float(v) for v in raw], dtype=np.float64)


def load_csv(path: str, schema: DatasetSchema) -> SurvivalDataset:
    """Read a UTF-8, comma-delimited CSV with a header row into a dataset.

    Raises:
        FileNotFoundError: path does not exist
        SchemaError: a schema column is absent (names the column)
        DataParseError: non-numeric or missing cell (row, column)
        DataValidationError: non-positive time or event outside {0, 1} (row)
    """
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"Dataset file not found: {path}")
    frame = pd.read_csv(p, dtype=str, keep_default_na=False, encoding="utf-8")
    frame.columns = [c.strip() for c in frame.columns]
    for column in (schema.time, schema.event, *schema.features):
        if column not in frame.columns:
            raise SchemaError(column, str(path))

    time = _numeric_column(frame, schema.time)
    bad = np.flatnonzero(~(time > 0))
    if bad.size:
        raise DataValidationError(f"time must be positive, got {time[bad[0]]}", row=int(bad[0]))

    event_raw = _numeric_column(frame, schema.event)
    bad = np.flatnonzero(~np.isin(event_raw, (0.0, 1.0)))
    if bad.size:
        raise DataValidationError(f"event must be 0 or 1, got {event_raw[bad[0]]}", row=int(bad[0]))

    if schema.features:
        X = np.column_stack([_numeric_column(frame, c) for c in schema.features])
    else:
        X = np.empty((len(frame), 0))
    data = SurvivalDataset(X=X, time=time, event=event_raw == 1.0, feature_names=tuple(schema.features))
    logger.info("Loaded %s: n=%d p=%d censored=%d", path, data.n, data.p, data.n_censored)
    return data


def default_schema(data: SurvivalDataset) -> DatasetSchema:
    """Schema matching what save_csv writes for ``data``."""
    return DatasetSchema(time="time", event="event", features=list(data.feature_names))


def write_atomic(path: Path, text: str) -> None:
    """Write text to a temporary sibling, then rename over ``path``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def save_csv(data: SurvivalDataset, path: str) -> DatasetSchema:
    """Write ``data`` as CSV (features..., time, event); returns its schema."""
    schema = default_schema(data)
    rows = [
        [*data.X[i].tolist(), float(data.time[i]), int(data.event[i])]
        for i in range(data.n)
    ]
    sheet = CSVSheet(name="dataset", headers=[*schema.features, schema.time, schema.event], rows=rows)
    write_atomic(Path(path), sheet.to_csv_string())
    return schema


# --------------------------------------------------------------------------- #
#  Scaling                                                                     #
# --------------------------------------------------------------------------- #

def fit_scaler(data: SurvivalDataset) -> FeatureScaler:
    """Population z-score statistics; constant columns get scale 1."""
    sk = StandardScaler().fit(data.X)
    return FeatureScaler(center=sk.mean_, scale=sk.scale_)


def apply_scaler(scaler: FeatureScaler, data: SurvivalDataset) -> SurvivalDataset:
    return data.with_features(scaler.transform(data.X))


# --------------------------------------------------------------------------- #
#  Folds and subsampling                                                       #
# --------------------------------------------------------------------------- #

def kfold_split(data: SurvivalDataset, n_folds: int, seed: int) -> FoldAssignment:
    """Event-stratified fold assignment, deterministic given ``seed``.

    Records of each stratum (events, then censored) are shuffled and dealt
    round-robin with a shared counter, so fold sizes differ by at most one and
    each stratum's per-fold counts differ by at most one.
    """
    if n_folds < 2:
        raise FoldSplitError(f"n_folds must be >= 2, got {n_folds}")
    if data.n < n_folds:
        raise FoldSplitError(f"cannot split {data.n} records into {n_folds} folds")
    rng = np.random.default_rng(seed)
    fold_index = np.empty(data.n, dtype=np.int64)
    dealt = 0
    for stratum in (np.flatnonzero(data.event), np.flatnonzero(~data.event)):
        shuffled = rng.permutation(stratum)
        fold_index[shuffled] = (dealt + np.arange(shuffled.size)) % n_folds
        dealt += shuffled.size
    return FoldAssignment(fold_index=fold_index, n_folds=n_folds)


def subsample(data: SurvivalDataset, cap: int, seed: int) -> Tuple[SurvivalDataset, Optional[np.ndarray]]:
    """Seeded uniform subsample of at most ``cap`` records (original order kept).

    Returns the dataset and the kept indices, or (data, None) when n <= cap.
    """
    if data.n <= cap:
        return data, None
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(data.n, size=cap, replace=False))
    if not data.event[keep].any():
        raise DataValidationError(f"subsample of {cap} records contains no events")
    logger.warning("Subsampling %d -> %d records before similarity construction", data.n, cap)
    return data.subset(keep), keep
