"""
Cox Proportional Hazards Domain Model

h(t|x) = h0(t) exp(beta^T x). The model carries beta, the Breslow estimate of
the cumulative baseline hazard H0 and the scaler fit on its training data, so
held-out data can be transformed consistently.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np

from fairsurv.core.errors import DataValidationError, DimensionMismatchError
from fairsurv.models.dataset import FeatureScaler, _frozen


@dataclass(frozen=True, eq=False)
class StepFunction:
    """Right-continuous step function: value ``values[i]`` on [times[i], times[i+1]).

    Before ``times[0]`` the function equals ``initial``.
    """
    times: np.ndarray
    values: np.ndarray
    initial: float = 0.0

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=np.float64).reshape(-1)
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if times.shape != values.shape:
            raise DataValidationError("step function times and values differ in length")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise DataValidationError("step function times must be strictly increasing")
        object.__setattr__(self, "times", _frozen(times))
        object.__setattr__(self, "values", _frozen(values))

    def _lookup(self, idx: np.ndarray):
        if not self.values.size:
            out = np.full(idx.shape, self.initial, dtype=np.float64)
        else:
            out = np.where(idx >= 0, self.values[np.clip(idx, 0, None)], self.initial)
        return out if out.ndim else float(out)

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        return self._lookup(np.searchsorted(self.times, t, side="right") - 1)

    def left_limit(self, t):
        """Value just before t, i.e. F(t-)."""
        t = np.asarray(t, dtype=np.float64)
        return self._lookup(np.searchsorted(self.times, t, side="left") - 1)

    def to_pairs(self) -> list:
        return [[float(t), float(v)] for t, v in zip(self.times, self.values)]


@dataclass(frozen=True, eq=False)
class RiskScores:
    """exp(beta^T x_i) per record; all strictly positive."""
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if not (values > 0).all():
            raise DataValidationError("risk scores must be positive")
        object.__setattr__(self, "values", _frozen(values))

    def __len__(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True, eq=False)
class CoxModel:
    """Fitted Cox model: coefficients, Breslow cumulative baseline hazard, scaler."""
    beta: np.ndarray
    baseline_hazard: StepFunction
    scaler: Optional[FeatureScaler] = None
    feature_names: Tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        beta = np.asarray(self.beta, dtype=np.float64).reshape(-1)
        if self.scaler is not None and self.scaler.p != beta.shape[0]:
            raise DimensionMismatchError(beta.shape[0], self.scaler.p, what="scaler features")
        H = self.baseline_hazard.values
        if H.size and (H[0] < 0 or np.any(np.diff(H) < 0)):
            raise DataValidationError("cumulative baseline hazard must be non-negative and non-decreasing")
        object.__setattr__(self, "beta", _frozen(beta))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def p(self) -> int:
        return int(self.beta.shape[0])

    def linear_predictor(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.p:
            raise DimensionMismatchError(self.p, X.shape[-1])
        return X @ self.beta

    def predict_survival(self, X: np.ndarray, times) -> np.ndarray:
        """S(t|x) for every row of X (rows) and every t (columns)."""
        times = np.atleast_1d(np.asarray(times, dtype=np.float64))
        H0 = np.asarray(self.baseline_hazard(times), dtype=np.float64).reshape(-1)
        risk = np.exp(self.linear_predictor(X))
        return np.exp(-np.outer(risk, H0))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "beta": self.beta.tolist(),
            "baseline": self.baseline_hazard.to_pairs(),
            "scaler": self.scaler.to_dict() if self.scaler is not None else None,
            "feature_names": list(self.feature_names),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "CoxModel":
        pairs = d.get("baseline") or []
        times = np.array([p[0] for p in pairs], dtype=np.float64)
        values = np.array([p[1] for p in pairs], dtype=np.float64)
        scaler = FeatureScaler.from_dict(d["scaler"]) if d.get("scaler") else None
        return cls(
            beta=np.array(d["beta"], dtype=np.float64),
            baseline_hazard=StepFunction(times, values),
            scaler=scaler,
            feature_names=tuple(d.get("feature_names") or ()),
        )

    @classmethod
    def from_json(cls, text: str) -> "CoxModel":
        return cls.from_dict(json.loads(text))
