"""
Training traces, evaluation reports and their tabular (CSV) renderings.

Every CSV this package writes goes through CSVSheet so float formatting is
identical across runs (``repr`` of the float, shortest round-trip form).
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

METRIC_COLUMNS = ("fndcg_at_k", "c_index", "brier", "time_dependent_auc")


def format_value(v: Any) -> Any:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    return v


@dataclass
class CSVSheet:
    """One logical CSV file."""
    name: str
    headers: List[str]
    rows: List[List[Any]]

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.headers)
        writer.writerows([[format_value(v) for v in row] for row in self.rows])
        return buf.getvalue()


# --------------------------------------------------------------------------- #
#  Training trace                                                              #
# --------------------------------------------------------------------------- #

@dataclass
class EpochRecord:
    epoch: int
    utility: float
    surrogate: float
    fndcg: float
    grad_norm: float


@dataclass
class TrainTrace:
    """Per-epoch optimisation record (one entry per epoch)."""
    epochs: List[EpochRecord] = field(default_factory=list)
    final_fndcg: float = float("nan")
    final_c_index: float = float("nan")
    skipped_batches: int = 0

    def append(self, record: EpochRecord) -> None:
        self.epochs.append(record)

    def __len__(self) -> int:
        return len(self.epochs)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.epochs], dtype=np.float64)

    def to_sheet(self) -> CSVSheet:
        return CSVSheet(
            name="trace",
            headers=["epoch", "utility", "surrogate", "fndcg", "grad_norm"],
            rows=[[r.epoch, r.utility, r.surrogate, r.fndcg, r.grad_norm] for r in self.epochs],
        )

    def to_csv(self) -> str:
        return self.to_sheet().to_csv_string()


# --------------------------------------------------------------------------- #
#  Evaluation report                                                           #
# --------------------------------------------------------------------------- #

@dataclass
class FoldMetrics:
    """Percent-scaled metrics of one held-out fold (NaN = failed)."""
    fold: int
    fndcg_at_k: float = float("nan")
    c_index: float = float("nan")
    brier: float = float("nan")
    time_dependent_auc: float = float("nan")
    n_test: int = 0
    skipped: bool = False
    failed: List[str] = field(default_factory=list)
    note: str = ""

    def metric_values(self) -> List[float]:
        return [getattr(self, m) for m in METRIC_COLUMNS]


@dataclass
class EvalReport:
    """Aggregate and per-fold FNDCG@k%, C-index%, Brier%, tAUC%."""
    fndcg_at_k: float
    c_index: float
    brier: float
    time_dependent_auc: float
    std: Dict[str, float] = field(default_factory=dict)
    folds: List[FoldMetrics] = field(default_factory=list)
    config: Dict[str, Any] = field(default_factory=dict)
    failed: List[str] = field(default_factory=list)
    aggregation_window: str = "integrated over event times"
    subsample: Optional[Dict[str, int]] = None

    def metric_values(self) -> List[float]:
        return [getattr(self, m) for m in METRIC_COLUMNS]

    def check_ranges(self) -> None:
        for name, value in zip(METRIC_COLUMNS, self.metric_values()):
            if not math.isnan(value) and not 0.0 <= value <= 100.0:
                raise ValueError(f"{name}={value} outside [0, 100]")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "EvalReport":
        d = dict(d)
        d["folds"] = [FoldMetrics(**f) for f in d.get("folds", [])]
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls.from_dict(json.loads(text))

    def to_csv_row(self) -> List[float]:
        """Row in column order FNDCG@k%, C-index%, Brier%, tAUC%."""
        return self.metric_values()

    def to_sheet(self) -> CSVSheet:
        k = self.config.get("k", "k")
        headers = ["fold", f"FNDCG@{k}%", "C-index%", "Brier%", "tAUC%", "n_test", "note"]
        rows: List[List[Any]] = []
        for f in self.folds:
            rows.append([f.fold, *f.metric_values(), f.n_test, f.note])
        rows.append(["mean", *self.metric_values(), sum(f.n_test for f in self.folds), ""])
        rows.append(["std", *[self.std.get(m, float("nan")) for m in METRIC_COLUMNS], "", ""])
        return CSVSheet(name="report", headers=headers, rows=rows)


def aggregate_folds(folds: Sequence[FoldMetrics], config: Dict[str, Any], **extra: Any) -> EvalReport:
    """Mean and (population) standard deviation over non-skipped folds, per metric."""
    means: Dict[str, float] = {}
    stds: Dict[str, float] = {}
    failed: List[str] = []
    for m in METRIC_COLUMNS:
        vals = np.array(
            [getattr(f, m) for f in folds if not f.skipped and not math.isnan(getattr(f, m))],
            dtype=np.float64,
        )
        if vals.size == 0:
            means[m] = float("nan")
            stds[m] = float("nan")
            failed.append(m)
        else:
            means[m] = float(vals.mean())
            stds[m] = float(vals.std())
    return EvalReport(
        fndcg_at_k=means["fndcg_at_k"],
        c_index=means["c_index"],
        brier=means["brier"],
        time_dependent_auc=means["time_dependent_auc"],
        std=stds,
        folds=list(folds),
        config=dict(config),
        failed=failed,
        **extra,
    )


# --------------------------------------------------------------------------- #
#  Grid search                                                                 #
# --------------------------------------------------------------------------- #

@dataclass
class GridCell:
    """One (gamma, k, fold) fit; ``error`` is empty unless the fit failed."""
    gamma: float
    k: int
    fold: int
    metrics: FoldMetrics
    error: str = ""


@dataclass
class GridRow:
    gamma: float
    k: int
    report: EvalReport


@dataclass
class GridTable:
    """Grid-search results, rows in lexicographic (gamma, k) order."""
    variant: str
    rows: List[GridRow] = field(default_factory=list)
    cells: List[GridCell] = field(default_factory=list)

    @classmethod
    def from_cells(cls, cells: Sequence[GridCell], variant: str) -> "GridTable":
        ordered = sorted(cells, key=lambda c: (c.gamma, c.k, c.fold))
        rows: List[GridRow] = []
        keys = sorted({(c.gamma, c.k) for c in ordered})
        for gamma, k in keys:
            folds = [c.metrics for c in ordered if c.gamma == gamma and c.k == k]
            report = aggregate_folds(folds, {"gamma": gamma, "k": k, "variant": variant})
            rows.append(GridRow(gamma=gamma, k=k, report=report))
        return cls(variant=variant, rows=rows, cells=list(ordered))

    @property
    def failed_cells(self) -> List[GridCell]:
        return [c for c in self.cells if c.error]

    def long_sheet(self) -> CSVSheet:
        """Plot-ready long format: variant, gamma, k, fold, metric, value."""
        rows: List[List[Any]] = []
        for c in self.cells:
            for m in METRIC_COLUMNS:
                value = getattr(c.metrics, m)
                if not math.isnan(value):
                    rows.append([self.variant, c.gamma, c.k, c.fold, m, value])
        return CSVSheet(name="sweep", headers=["variant", "gamma", "k", "fold", "metric", "value"], rows=rows)

    def summary_sheet(self) -> CSVSheet:
        """Mean and std per (gamma, k)."""
        headers = ["variant", "gamma", "k", *METRIC_COLUMNS, *[f"{m}_std" for m in METRIC_COLUMNS]]
        rows = [
            [self.variant, r.gamma, r.k, *r.report.metric_values(), *[r.report.std[m] for m in METRIC_COLUMNS]]
            for r in self.rows
        ]
        return CSVSheet(name="sweep_summary", headers=headers, rows=rows)
