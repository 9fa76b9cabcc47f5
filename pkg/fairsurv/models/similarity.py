"""
Similarity Domain Model

Sim_D' (input space) and Sim_D (output space) are dense n x n matrices with
entries in [0, 1]. Diagonals are ignored by every consumer.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from fairsurv.core.errors import DataValidationError
from fairsurv.models.dataset import _frozen


class SimilarityKind(str, Enum):
    INPUT = "input"
    OUTPUT = "output"


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    values: np.ndarray
    kind: SimilarityKind

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise DataValidationError(f"similarity matrix must be square, got shape {values.shape}")
        if values.size and (values.min() < 0.0 or values.max() > 1.0):
            raise DataValidationError("similarity values must lie in [0, 1]")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "kind", SimilarityKind(self.kind))

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    def row(self, anchor: int) -> np.ndarray:
        return self.values[anchor]


@dataclass(frozen=True, eq=False)
class RankedList:
    """Other records ordered by descending similarity to ``anchor``."""
    anchor: int
    order: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "order", _frozen(np.asarray(self.order, dtype=np.int64)))

    def top(self, k: int) -> np.ndarray:
        return self.order[:k]


@dataclass(frozen=True, eq=False)
class ConcordanceVector:
    """Per-individual concordance C_x in [0, 1].

    ``defined[g]`` is False when anchor g has no comparable pair; its value is 0.
    """
    values: np.ndarray
    defined: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.size and (values.min() < 0.0 or values.max() > 1.0):
            raise DataValidationError("concordance values must lie in [0, 1]")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "defined", _frozen(np.asarray(self.defined, dtype=bool)))

    def __len__(self) -> int:
        return int(self.values.shape[0])
