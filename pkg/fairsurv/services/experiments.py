"""
Cross-validated experiment protocols shared by the CLI commands.

Every protocol draws its folds once (event-stratified, seeded by the training
seed) and reuses them for every variant or grid cell, so comparisons are
paired.
"""
from __future__ import annotations

import logging
from typing import Dict, List, Optional, Sequence, Tuple

from fairsurv.core.config import ExperimentConfig, TrainConfig
from fairsurv.core.errors import ConfigError
from fairsurv.models.dataset import FoldAssignment, SurvivalDataset
from fairsurv.models.report import CSVSheet, EvalReport, GridTable, METRIC_COLUMNS, aggregate_folds
from fairsurv.services.data_io import kfold_split, load_csv, subsample
from fairsurv.services.training import grid_search, train_and_evaluate_fold

logger = logging.getLogger(__name__)

METRIC_LABELS = {
    "fndcg_at_k": "FNDCG@{k}%",
    "c_index": "C-index%",
    "brier": "Brier%",
    "time_dependent_auc": "tAUC%",
}


def metric_label(metric: str, k: int) -> str:
    return METRIC_LABELS[metric].format(k=k)


def load_experiment_data(cfg: ExperimentConfig, cap: int, seed: int) -> Tuple[SurvivalDataset, Optional[Dict[str, int]]]:
    """Load the configured CSV and apply the similarity subsample cap.

    Returns the dataset and ``{"original": n, "kept": cap}`` when subsampled.
    """
    if not cfg.data.path:
        raise ConfigError("data.path is not set (use --config or --data)")
    data = load_csv(cfg.data.path, cfg.data.resolve_schema())
    return cap_dataset(data, cap, seed)


def cap_dataset(data: SurvivalDataset, cap: int, seed: int) -> Tuple[SurvivalDataset, Optional[Dict[str, int]]]:
    capped, keep = subsample(data, cap, seed)
    if keep is None:
        return data, None
    return capped, {"original": data.n, "kept": capped.n}


def _echo(train: TrainConfig, n_folds: int) -> Dict[str, object]:
    return {
        "gamma": train.gamma,
        "k": train.k,
        "seed": train.seed,
        "variant": train.variant,
        "n_folds": n_folds,
    }


def cross_validate(
    data: SurvivalDataset,
    train: TrainConfig,
    folds: FoldAssignment,
    tie_credit: bool = False,
    grid_points: int = 100,
    subsample_info: Optional[Dict[str, int]] = None,
) -> EvalReport:
    """Fit and evaluate ``train`` on every fold; mean and std over folds."""
    fold_metrics = [
        train_and_evaluate_fold(data, folds, f, train, tie_credit, grid_points)
        for f in range(folds.n_folds)
    ]
    report = aggregate_folds(fold_metrics, _echo(train, folds.n_folds), subsample=subsample_info)
    logger.info(
        "CV variant=%s gamma=%g k=%d: FNDCG=%.2f C-index=%.2f",
        train.variant, train.gamma, train.k, report.fndcg_at_k, report.c_index,
    )
    return report


def compare_variants(
    data: SurvivalDataset,
    train: TrainConfig,
    variants: Sequence[str],
    n_folds: int,
    tie_credit: bool = False,
    grid_points: int = 100,
    subsample_info: Optional[Dict[str, int]] = None,
) -> Dict[str, EvalReport]:
    """Cross-validate each variant on the same folds with the same seed."""
    folds = kfold_split(data, n_folds, train.seed)
    return {
        v: cross_validate(data, train.model_copy(update={"variant": v}), folds, tie_credit, grid_points, subsample_info)
        for v in variants
    }


def ablation_variants(include_plain: bool) -> List[str]:
    return ["fair", "lipschitz"] + (["plain"] if include_plain else [])


def ablation_sheet(reports: Dict[str, EvalReport], k: int) -> CSVSheet:
    """One row per variant: FNDCG@k% mean/std, then C-index% mean/std."""
    fndcg, cidx = metric_label("fndcg_at_k", k), metric_label("c_index", k)
    headers = ["variant", fndcg, f"{fndcg} std", cidx, f"{cidx} std"]
    rows = [
        [v, r.fndcg_at_k, r.std.get("fndcg_at_k"), r.c_index, r.std.get("c_index")]
        for v, r in reports.items()
    ]
    return CSVSheet(name="ablation", headers=headers, rows=rows)


def paired_sheet(
    reports: Dict[str, EvalReport],
    k: int,
    metrics: Sequence[str] = METRIC_COLUMNS,
) -> CSVSheet:
    """Per-fold paired comparison: for each metric, one column per variant."""
    variants = list(reports)
    headers = ["fold"] + [f"{metric_label(m, k)} {v}" for m in metrics for v in variants]
    first = reports[variants[0]]
    rows = []
    for i, fold in enumerate(first.folds):
        row = [fold.fold]
        for m in metrics:
            row.extend(getattr(reports[v].folds[i], m) for v in variants)
        rows.append(row)
    rows.append(["mean"] + [getattr(reports[v], m) for m in metrics for v in variants])
    return CSVSheet(name="paired", headers=headers, rows=rows)


def run_sweep(
    data: SurvivalDataset,
    cfg: ExperimentConfig,
    workers: Optional[int] = None,
) -> GridTable:
    """Grid search over the configured gamma and k grids; failed cells are recorded."""
    folds = kfold_split(data, cfg.experiment.n_folds, cfg.train.seed)
    return grid_search(
        data,
        folds,
        cfg.experiment.gamma_grid,
        cfg.experiment.k_grid,
        cfg.train,
        tie_credit=cfg.experiment.tie_credit,
        grid_points=cfg.experiment.brier_grid_points,
        workers=workers,
        continue_on_error=True,
    )
