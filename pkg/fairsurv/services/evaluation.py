"""
Censoring-aware evaluation.

- c_index: strict comparable-pair concordance (optional 0.5 credit for risk ties)
- brier_score / integrated_brier: inverse-probability-of-censoring weighted
  Brier score, censoring survival G estimated by Kaplan-Meier on the same data
- time_dependent_auc / integrated_auc: cumulative/dynamic AUC, cases weighted
  by 1/G(T_i-), integrated with event-density weights
- evaluate: all four metrics plus exact FNDCG@k, percent-scaled
"""
from __future__ import annotations

import logging
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import trapezoid

from fairsurv.core.errors import DataValidationError, MetricUndefinedError
from fairsurv.models.cox import CoxModel, RiskScores, StepFunction
from fairsurv.models.dataset import SurvivalDataset
from fairsurv.models.report import CSVSheet, EvalReport, METRIC_COLUMNS
from fairsurv.models.similarity import SimilarityMatrix
from fairsurv.services.fairness import fndcg_at_k, output_similarity
from fairsurv.services.survival import kaplan_meier, risk_scores

logger = logging.getLogger(__name__)

BLOCK_ROWS = 1024


def _risk(scores) -> np.ndarray:
    if isinstance(scores, RiskScores):
        return scores.values
    return np.asarray(scores, dtype=np.float64).reshape(-1)


# --------------------------------------------------------------------------- #
#  Concordance                                                                 #
# --------------------------------------------------------------------------- #

def c_index(scores, data: SurvivalDataset, tie_credit: bool = False) -> float:
    """Fraction of comparable pairs (i uncensored, T_j > T_i) with risk_j < risk_i.

    Raises:
        MetricUndefinedError: no comparable pairs
    """
    r = _risk(scores)
    time, event = data.time, data.event
    concordant = 0
    tied = 0
    comparable = 0
    for lo in range(0, data.n, BLOCK_ROWS):
        hi = min(lo + BLOCK_ROWS, data.n)
        comp = event[lo:hi, None] & (time[lo:hi, None] < time[None, :])
        comparable += int(comp.sum())
        concordant += int((comp & (r[None, :] < r[lo:hi, None])).sum())
        if tie_credit:
            tied += int((comp & (r[None, :] == r[lo:hi, None])).sum())
    if comparable == 0:
        raise MetricUndefinedError("C-index undefined: no comparable pairs")
    return (concordant + 0.5 * tied) / comparable


# --------------------------------------------------------------------------- #
#  Brier score                                                                 #
# --------------------------------------------------------------------------- #

def censoring_survival(data: SurvivalDataset) -> StepFunction:
    """Kaplan-Meier estimate of G(t) = P(C > t) (censorings are the 'events')."""
    return kaplan_meier(data.time, ~data.event)


def ipcw_brier(
    surv_at_t: np.ndarray,
    time: np.ndarray,
    event: np.ndarray,
    t: float,
    censoring: StepFunction,
) -> float:
    """IPCW Brier score of predicted S(t|x_i) at a single time t."""
    surv_at_t = np.asarray(surv_at_t, dtype=np.float64)
    case = (time <= t) & event
    control = time > t
    g_case = np.asarray(censoring.left_limit(time), dtype=np.float64)
    g_t = float(censoring(t))
    excluded = int(np.sum(case & (g_case <= 0))) + (int(control.sum()) if g_t <= 0 else 0)
    if excluded:
        logger.warning("Brier at t=%g: %d individuals excluded (censoring survival is 0)", t, excluded)
    with np.errstate(divide="ignore", invalid="ignore"):
        case_term = np.where(case & (g_case > 0), surv_at_t ** 2 / g_case, 0.0)
        control_term = np.where(control, (1.0 - surv_at_t) ** 2 / g_t, 0.0) if g_t > 0 else np.zeros_like(surv_at_t)
    return float(np.mean(case_term + control_term))


def brier_score(model: CoxModel, data: SurvivalDataset, t: float) -> float:
    if not t > 0:
        raise DataValidationError(f"Brier score needs t > 0, got {t}")
    surv = model.predict_survival(data.X, [t])[:, 0]
    return ipcw_brier(surv, data.time, data.event, t, censoring_survival(data))


def default_time_grid(data: SurvivalDataset, points: int = 100) -> np.ndarray:
    """Equally spaced points between the first and last observed event time."""
    event_times = data.time[data.event]
    lo, hi = float(event_times.min()), float(event_times.max())
    if points < 2 or hi <= lo:
        return np.array([lo])
    return np.linspace(lo, hi, points)


def brier_curve(model: CoxModel, data: SurvivalDataset, grid: Optional[Sequence[float]] = None) -> Tuple[np.ndarray, np.ndarray]:
    grid = default_time_grid(data) if grid is None else np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise DataValidationError("time grid is empty")
    if np.any(grid <= 0):
        raise DataValidationError("time grid must be positive")
    G = censoring_survival(data)
    surv = model.predict_survival(data.X, grid)
    values = np.array([ipcw_brier(surv[:, j], data.time, data.event, t, G) for j, t in enumerate(grid)])
    return grid, values


def integrated_brier(model: CoxModel, data: SurvivalDataset, grid: Optional[Sequence[float]] = None, points: int = 100) -> float:
    """Trapezoidal average of the Brier score over ``grid`` (default: event-time range)."""
    grid = default_time_grid(data, points) if grid is None else grid
    grid, values = brier_curve(model, data, grid)
    if grid.size == 1:
        return float(values[0])
    return float(trapezoid(values, grid) / (grid[-1] - grid[0]))


# --------------------------------------------------------------------------- #
#  Time-dependent AUC                                                          #
# --------------------------------------------------------------------------- #

def _auc_at(r: np.ndarray, time: np.ndarray, event: np.ndarray, t: float, censoring: StepFunction, tie_credit: bool) -> float:
    g_case = np.asarray(censoring.left_limit(time), dtype=np.float64)
    case = (time <= t) & event & (g_case > 0)
    control = time > t
    if not case.any() or not control.any():
        raise MetricUndefinedError(f"time-dependent AUC undefined at t={t:g}: no cases or no controls")
    weights = 1.0 / g_case[case]
    controls = np.sort(r[control])
    below = np.searchsorted(controls, r[case], side="left")
    credit = below.astype(np.float64)
    if tie_credit:
        credit += 0.5 * (np.searchsorted(controls, r[case], side="right") - below)
    return float(np.sum(weights * credit) / (np.sum(weights) * controls.size))


def time_dependent_auc(model: CoxModel, data: SurvivalDataset, t: float, tie_credit: bool = False) -> float:
    """Cumulative/dynamic AUC at t: cases T_i <= t with an event, controls T_j > t."""
    r = risk_scores(model, data).values
    return _auc_at(r, data.time, data.event, t, censoring_survival(data), tie_credit)


def auc_curve(model: CoxModel, data: SurvivalDataset, times: Optional[Sequence[float]] = None, tie_credit: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """AUC at each time (default: distinct event times); NaN where undefined."""
    times = np.unique(data.time[data.event]) if times is None else np.asarray(times, dtype=np.float64)
    r = risk_scores(model, data).values
    G = censoring_survival(data)
    values = np.full(times.shape[0], np.nan)
    for j, t in enumerate(times):
        try:
            values[j] = _auc_at(r, data.time, data.event, t, G, tie_credit)
        except MetricUndefinedError as e:
            logger.debug("%s", e)
    return times, values


def integrated_auc(model: CoxModel, data: SurvivalDataset, times: Optional[Sequence[float]] = None, tie_credit: bool = False) -> float:
    """AUC averaged over event times, weighted by the drop of the Kaplan-Meier survival."""
    times, values = auc_curve(model, data, times, tie_credit)
    km = kaplan_meier(data.time, data.event)
    s_times = np.asarray(km(times), dtype=np.float64).reshape(-1)
    density = -np.diff(np.concatenate(([1.0], s_times)))
    valid = ~np.isnan(values) & (density > 0)
    if not valid.any():
        raise MetricUndefinedError("integrated AUC undefined: no time with both cases and controls")
    return float(np.sum(values[valid] * density[valid]) / np.sum(density[valid]))


def curves_sheet(model: CoxModel, data: SurvivalDataset, grid: Optional[Sequence[float]] = None, tie_credit: bool = False) -> CSVSheet:
    """Per-time Brier and AUC curves on one grid (time, brier, auc)."""
    grid, brier = brier_curve(model, data, grid)
    _, auc = auc_curve(model, data, grid, tie_credit)
    return CSVSheet(name="curves", headers=["time", "brier", "auc"], rows=[list(row) for row in zip(grid, brier, auc)])


# --------------------------------------------------------------------------- #
#  Report                                                                      #
# --------------------------------------------------------------------------- #

def evaluate(
    model: CoxModel,
    data: SurvivalDataset,
    sim_in: SimilarityMatrix,
    k: int,
    tie_credit: bool = False,
    grid_points: int = 100,
    config: Optional[Dict[str, Any]] = None,
) -> EvalReport:
    """Exact FNDCG@k, C-index, integrated Brier and integrated tAUC, in percent.

    Metrics that cannot be computed are reported as NaN and listed in
    ``EvalReport.failed``.
    """
    scores = risk_scores(model, data)
    computations = {
        "fndcg_at_k": lambda: fndcg_at_k(sim_in, output_similarity(scores, data), k),
        "c_index": lambda: c_index(scores, data, tie_credit),
        "brier": lambda: integrated_brier(model, data, points=grid_points),
        "time_dependent_auc": lambda: integrated_auc(model, data, tie_credit=tie_credit),
    }
    values: Dict[str, float] = {}
    failed: List[str] = []
    for name in METRIC_COLUMNS:
        try:
            value = computations[name]()
        except (MetricUndefinedError, DataValidationError) as e:
            logger.warning("Metric %s failed: %s", name, e)
            failed.append(name)
            value = math.nan
        if not math.isnan(value) and not -1e-12 <= value <= 1.0 + 1e-12:
            if name != "brier":
                raise ArithmeticError(f"{name}={value} outside [0, 1]")
            # inverse-censoring weights can push a small sample past 1
            logger.warning("Integrated Brier %.4f exceeds 1; clamped", value)
        values[name] = 100.0 * min(max(value, 0.0), 1.0) if not math.isnan(value) else math.nan
    echo = {"k": k, "tie_credit": tie_credit}
    echo.update(config or {})
    report = EvalReport(config=echo, failed=failed, **values)
    report.check_ranges()
    return report
