"""
Censored Dataset Domain Model

A survival dataset is N individuals, each with a feature vector x, an observed
time T (event or censoring time) and an event indicator delta (True = event
observed at T, False = censored at T).

Storage is column-wise (numpy arrays); all arrays are read-only after
construction so datasets can be shared across threads and worker processes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from fairsurv.core.errors import DataValidationError, DimensionMismatchError


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SurvivalRecord:
    """One individual's (x, T, delta) tuple."""
    features: Tuple[float, ...]
    time: float
    event: bool

    def __post_init__(self) -> None:
        if not self.time > 0:
            raise DataValidationError(f"time must be positive, got {self.time}")


@dataclass(frozen=True, eq=False)
class SurvivalDataset:
    """Ordered collection of survival records sharing dimension p.

    Invariants: n >= 2, at least one observed event, all times > 0, all
    features finite.
    """
    X: np.ndarray
    time: np.ndarray
    event: np.ndarray
    feature_names: Tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        time = np.asarray(self.time, dtype=np.float64).reshape(-1)
        event = np.asarray(self.event).reshape(-1).astype(bool)
        n = X.shape[0]
        if time.shape[0] != n or event.shape[0] != n:
            raise DataValidationError(
                f"features ({n} rows), time ({time.shape[0]}) and event ({event.shape[0]}) lengths differ"
            )
        if n < 2:
            raise DataValidationError(f"a dataset needs at least 2 records, got {n}")
        bad = np.flatnonzero(~(time > 0) | ~np.isfinite(time))
        if bad.size:
            raise DataValidationError(f"time must be positive and finite, got {time[bad[0]]}", row=int(bad[0]))
        bad_rows = np.flatnonzero(~np.isfinite(X).all(axis=1))
        if bad_rows.size:
            raise DataValidationError("features must be finite", row=int(bad_rows[0]))
        if not event.any():
            raise DataValidationError("at least one record must have an observed event")
        names = tuple(self.feature_names) or tuple(f"x{j}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DimensionMismatchError(X.shape[1], len(names), what="feature names")
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "time", _frozen(time))
        object.__setattr__(self, "event", _frozen(event))
        object.__setattr__(self, "feature_names", names)

    @classmethod
    def from_records(cls, records: Sequence[SurvivalRecord], feature_names: Sequence[str] = ()) -> "SurvivalDataset":
        dims = {len(r.features) for r in records}
        if len(dims) > 1:
            raise DataValidationError(f"records have differing feature counts: {sorted(dims)}")
        return cls(
            X=np.array([r.features for r in records], dtype=np.float64),
            time=np.array([r.time for r in records], dtype=np.float64),
            event=np.array([r.event for r in records], dtype=bool),
            feature_names=tuple(feature_names),
        )

    @property
    def n(self) -> int:
        return int(self.X.shape[0])

    @property
    def p(self) -> int:
        return int(self.X.shape[1])

    @property
    def n_events(self) -> int:
        return int(self.event.sum())

    @property
    def n_censored(self) -> int:
        return self.n - self.n_events

    @property
    def censor_rate(self) -> float:
        return self.n_censored / self.n

    @property
    def records(self) -> List[SurvivalRecord]:
        return [
            SurvivalRecord(tuple(float(v) for v in self.X[i]), float(self.time[i]), bool(self.event[i]))
            for i in range(self.n)
        ]

    def subset(self, indices: Sequence[int]) -> "SurvivalDataset":
        """Records at ``indices`` (in the given order)."""
        idx = np.asarray(indices, dtype=np.int64)
        return SurvivalDataset(self.X[idx], self.time[idx], self.event[idx], self.feature_names)

    def with_features(self, X: np.ndarray) -> "SurvivalDataset":
        return SurvivalDataset(X, self.time, self.event, self.feature_names)

    def check_dimension(self, p: int) -> None:
        if self.p != p:
            raise DimensionMismatchError(p, self.p)

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"<SurvivalDataset n={self.n} p={self.p} events={self.n_events}>"


@dataclass(frozen=True, eq=False)
class FeatureScaler:
    """Per-feature z-score transform (center, positive scale)."""
    center: np.ndarray
    scale: np.ndarray

    def __post_init__(self) -> None:
        center = np.asarray(self.center, dtype=np.float64).reshape(-1)
        scale = np.asarray(self.scale, dtype=np.float64).reshape(-1)
        if center.shape != scale.shape:
            raise DimensionMismatchError(center.shape[0], scale.shape[0], what="scale entries")
        if not (scale > 0).all():
            raise DataValidationError("scaler scale entries must be positive")
        object.__setattr__(self, "center", _frozen(center))
        object.__setattr__(self, "scale", _frozen(scale))

    @property
    def p(self) -> int:
        return int(self.center.shape[0])

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.p:
            raise DimensionMismatchError(self.p, X.shape[-1])
        return (X - self.center) / self.scale

    def inverse_transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.p:
            raise DimensionMismatchError(self.p, X.shape[-1])
        return X * self.scale + self.center

    def invert(self, data: SurvivalDataset) -> SurvivalDataset:
        return data.with_features(self.inverse_transform(data.X))

    def to_dict(self) -> Dict[str, Any]:
        return {"center": self.center.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "FeatureScaler":
        return cls(center=np.array(d["center"], dtype=np.float64), scale=np.array(d["scale"], dtype=np.float64))


@dataclass(frozen=True, eq=False)
class FoldAssignment:
    """Fold index per record; every record assigned to exactly one fold."""
    fold_index: np.ndarray
    n_folds: int

    def __post_init__(self) -> None:
        idx = np.asarray(self.fold_index, dtype=np.int64).reshape(-1)
        if self.n_folds < 2:
            raise DataValidationError(f"n_folds must be >= 2, got {self.n_folds}")
        if idx.size and (idx.min() < 0 or idx.max() >= self.n_folds):
            raise DataValidationError("fold indices must lie in [0, n_folds)")
        object.__setattr__(self, "fold_index", _frozen(idx))

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_index == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_index != fold)

    def fold_sizes(self) -> List[int]:
        return np.bincount(self.fold_index, minlength=self.n_folds).tolist()

    def splits(self) -> List[Tuple[np.ndarray, np.ndarray]]:
        return [(self.train_indices(f), self.test_indices(f)) for f in range(self.n_folds)]


def dataset_summary(data: SurvivalDataset, name: Optional[str] = None) -> Dict[str, Any]:
    """Dataset characteristics: sample #, censored #, censored rate, feature #."""
    return {
        "dataset": name or "",
        "samples": data.n,
        "censored": data.n_censored,
        "censored_rate": round(data.censor_rate, 3),
        "features": data.p,
    }
