"""
Fairness-regularised Cox training.

    L_unified(beta) = L_utility(beta) - gamma * L_fairness(beta)

L_utility is the negative log partial likelihood of the mini-batch. The
fairness term depends on ``TrainConfig.variant``:

    fair       soft-rank relaxation of FNDCG@k (maximised)
    lipschitz  negated Lipschitz-violation penalty
    plain      0 (ordinary Cox regression)

Exact FNDCG@k only depends on rankings and is piecewise constant in beta, so
the fair variant optimises a smooth surrogate. For anchor i and neighbour j,
with concordance-adjusted output similarity A (concordance indicators relaxed
to sigmoids):

    R_ij = 1 + sum_{l != i, j} sigmoid((A_il - A_ij) / tau)          soft rank
    h_ij = sigmoid((k + 1/2 - R_ij) / tau)                            soft top-k
    F    = mean_i  sum_j G_ij h_ij / log2(R_ij + 1) / IDCG_i

G is the input similarity of the batch. As tau -> 0, R becomes the output
rank, h the top-k indicator and F the exact FNDCG@k. The gradient is derived
analytically and back-propagated through A, the relaxed concordance and the
risk scores to beta.

Risk sets and rankings are computed within each mini-batch.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from fairsurv.core.config import TrainConfig, get_settings
from fairsurv.core.errors import (
    DataValidationError,
    FairSurvError,
    GridCellError,
    NonFiniteLossError,
)
from fairsurv.models.cox import CoxModel
from fairsurv.models.dataset import FeatureScaler, FoldAssignment, SurvivalDataset
from fairsurv.models.report import EpochRecord, FoldMetrics, GridCell, GridTable, TrainTrace
from fairsurv.models.similarity import SimilarityMatrix
from fairsurv.services.data_io import apply_scaler, fit_scaler
from fairsurv.services.evaluation import c_index, evaluate
from fairsurv.services.fairness import (
    discounts,
    input_similarity,
    input_similarity_values,
    lipschitz_penalty_gradient,
    model_fndcg,
    ranked_rows,
)
from fairsurv.services.survival import build_model, nll_arrays, nll_gradient_arrays

logger = logging.getLogger(__name__)

# Upper bound on anchor-block x m x m soft-rank temporaries (float64 elements).
SURROGATE_BLOCK_ELEMENTS = 1 << 22


class AdamOptimizer:
    """Adaptive moment estimation with bias-corrected first and second moments."""

    def __init__(self, learning_rate: float = 0.01, beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m: Optional[np.ndarray] = None
        self.v: Optional[np.ndarray] = None
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        """Return the updated parameters (``params`` is not modified)."""
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * (grad * grad)
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        return params - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)


# --------------------------------------------------------------------------- #
#  Surrogate                                                                   #
# --------------------------------------------------------------------------- #

def clamp_k(k: int, m: int) -> int:
    if k > m - 1:
        logger.warning("k=%d exceeds batch size - 1; clamped to %d", k, m - 1)
        return m - 1
    return k


def _soft_rank_block(A: np.ndarray, off: np.ndarray, tau: float, lo: int, hi: int) -> np.ndarray:
    """[i, j, l] = sigmoid((A_il - A_ij) / tau) for anchors lo..hi-1 and distinct i, j, l."""
    rows = A[lo:hi]
    mask = off[lo:hi, :, None] & off[lo:hi, None, :] & off[None, :, :]
    return expit((rows[:, None, :] - rows[:, :, None]) / tau) * mask


def _anchor_blocks(m: int):
    step = max(1, SURROGATE_BLOCK_ELEMENTS // (m * m))
    for lo in range(0, m, step):
        yield lo, min(lo + step, m)


def _surrogate(
    beta: np.ndarray,
    X: np.ndarray,
    time: np.ndarray,
    event: np.ndarray,
    G: np.ndarray,
    k: int,
    tau: float,
    with_grad: bool,
) -> Tuple[float, Optional[np.ndarray]]:
    m = X.shape[0]
    k = clamp_k(k, m)
    off = ~np.eye(m, dtype=bool)

    r = np.exp(X @ beta)
    dr = np.subtract.outer(r, r)
    S = np.exp(-np.abs(dr))

    # relaxed per-individual concordance; comp[a, b]: a shorter and uncensored
    comp = (time[:, None] < time[None, :]) & event[:, None]
    P = expit(dr / tau)
    Pm = np.where(comp, P, 0.0)
    cnt = comp.sum(axis=1) + comp.sum(axis=0)
    has = cnt > 0
    safe_cnt = np.maximum(cnt, 1)
    C = np.where(has, (Pm.sum(axis=1) + Pm.sum(axis=0)) / safe_cnt, 0.0)
    dC = np.subtract.outer(C, C)
    A = (1.0 - np.abs(dC)) * S

    R = np.empty((m, m))
    for lo, hi in _anchor_blocks(m):
        R[lo:hi] = 1.0 + _soft_rank_block(A, off, tau, lo, hi).sum(axis=2)
    h = expit((k + 0.5 - R) / tau)
    log_rank = np.log2(R + 1.0)

    ideal_order = ranked_rows(G, np.arange(m))[:, :k]
    idcg = np.take_along_axis(G, ideal_order, axis=1) @ discounts(k)
    valid = idcg > 0
    n_valid = int(valid.sum())
    if n_valid == 0:
        logger.warning("Surrogate undefined on this batch: every anchor has zero ideal DCG")
        return 0.0, (np.zeros_like(beta) if with_grad else None)

    U = np.where(off, G * h / log_rank, 0.0)
    value = float(np.sum(U.sum(axis=1)[valid] / idcg[valid]) / n_valid)
    if not with_grad:
        return value, None

    coef = np.where(valid, 1.0 / (n_valid * np.where(valid, idcg, 1.0)), 0.0)
    dh = -h * (1.0 - h) / tau
    dinv_log = -math.log(2.0) / (np.log(R + 1.0) ** 2 * (R + 1.0))
    GR = coef[:, None] * G * (dh / log_rank + h * dinv_log) * off

    GA = np.empty((m, m))
    for lo, hi in _anchor_blocks(m):
        Sg = _soft_rank_block(A, off, tau, lo, hi)
        W = GR[lo:hi, :, None] * (Sg * (1.0 - Sg) / tau)
        GA[lo:hi] = W.sum(axis=1) - W.sum(axis=2)

    GS = GA * (1.0 - np.abs(dC))
    Q = GA * S * np.sign(dC)
    GC = Q.sum(axis=0) - Q.sum(axis=1)

    Y = GS * S * np.sign(dr)
    Gr = Y.sum(axis=0) - Y.sum(axis=1)

    w = np.where(has, GC / safe_cnt, 0.0)
    Z = comp * (w[:, None] + w[None, :]) * P * (1.0 - P) / tau
    Gr = Gr + Z.sum(axis=1) - Z.sum(axis=0)

    return value, X.T @ (Gr * r)


def _check_batch(batch: SurvivalDataset, sim_in: SimilarityMatrix) -> None:
    if sim_in.n != batch.n:
        raise DataValidationError(f"input similarity has {sim_in.n} rows, batch has {batch.n} records")


def fairness_surrogate(beta: np.ndarray, batch: SurvivalDataset, sim_in: SimilarityMatrix, k: int, tau: float) -> float:
    """Smooth FNDCG@k surrogate of ``beta`` on ``batch`` (higher is fairer)."""
    _check_batch(batch, sim_in)
    value, _ = _surrogate(np.asarray(beta, dtype=np.float64), batch.X, batch.time, batch.event, sim_in.values, k, tau, False)
    return value


def fairness_surrogate_gradient(beta: np.ndarray, batch: SurvivalDataset, sim_in: SimilarityMatrix, k: int, tau: float) -> np.ndarray:
    _check_batch(batch, sim_in)
    _, grad = _surrogate(np.asarray(beta, dtype=np.float64), batch.X, batch.time, batch.event, sim_in.values, k, tau, True)
    return grad


# --------------------------------------------------------------------------- #
#  Unified objective                                                           #
# --------------------------------------------------------------------------- #

@dataclass
class ObjectiveValue:
    loss: float
    grad: np.ndarray
    utility: float
    fairness: float


def _objective(
    beta: np.ndarray,
    X: np.ndarray,
    time: np.ndarray,
    event: np.ndarray,
    G: Optional[np.ndarray],
    config: TrainConfig,
    normalize: bool,
) -> ObjectiveValue:
    utility = nll_arrays(beta, X, time, event)
    grad = nll_gradient_arrays(beta, X, time, event)
    if normalize:
        n_events = float(np.sum(event))
        utility /= n_events
        grad = grad / n_events
    if config.ridge:
        utility += config.ridge * float(beta @ beta)
        grad = grad + 2.0 * config.ridge * beta
    if not config.fairness_active:
        return ObjectiveValue(loss=utility, grad=grad, utility=utility, fairness=math.nan)

    if config.variant == "fair":
        term, term_grad = _surrogate(beta, X, time, event, G, config.k, config.surrogate_temperature, True)
    else:
        penalty, penalty_grad = lipschitz_penalty_gradient(beta, X, config.lipschitz_L)
        term, term_grad = -penalty, -penalty_grad
    return ObjectiveValue(
        loss=utility - config.gamma * term,
        grad=grad - config.gamma * term_grad,
        utility=utility,
        fairness=term,
    )


def unified_loss(
    beta: np.ndarray,
    batch: SurvivalDataset,
    sim_in: SimilarityMatrix,
    config: TrainConfig,
    normalize: bool = False,
) -> float:
    """Utility minus gamma times the variant's fairness term.

    With ``normalize`` the utility is divided by the batch event count, as in
    mini-batch training.
    """
    _check_batch(batch, sim_in)
    beta = np.asarray(beta, dtype=np.float64)
    return _objective(beta, batch.X, batch.time, batch.event, sim_in.values, config, normalize).loss


def unified_loss_gradient(
    beta: np.ndarray,
    batch: SurvivalDataset,
    sim_in: SimilarityMatrix,
    config: TrainConfig,
    normalize: bool = False,
) -> np.ndarray:
    _check_batch(batch, sim_in)
    beta = np.asarray(beta, dtype=np.float64)
    return _objective(beta, batch.X, batch.time, batch.event, sim_in.values, config, normalize).grad


# --------------------------------------------------------------------------- #
#  Fit                                                                         #
# --------------------------------------------------------------------------- #

def _trace_sample(data: SurvivalDataset, cap: int, seed: int) -> SurvivalDataset:
    if data.n <= cap:
        return data
    rng = np.random.default_rng([seed, 1])
    for _ in range(100):
        keep = np.sort(rng.choice(data.n, size=cap, replace=False))
        if data.event[keep].any():
            return data.subset(keep)
    return data


def _mean(values: List[float]) -> float:
    return float(np.mean(values)) if values else math.nan


def fit(
    data: SurvivalDataset,
    config: TrainConfig,
    scaler: Optional[FeatureScaler] = None,
    trace_cap: int = 1000,
) -> Tuple[CoxModel, TrainTrace]:
    """Adam on the unified objective over shuffled mini-batches.

    Deterministic given ``config.seed``. Batches with fewer than two records or
    without events are skipped. The per-epoch exact FNDCG@k is measured on at
    most ``trace_cap`` training records; the final FNDCG@k and C-index use all
    of ``data``.

    Raises:
        NonFiniteLossError: loss or gradient became NaN/inf
    """
    rng = np.random.default_rng(config.seed)
    optimizer = AdamOptimizer(config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_epsilon)
    beta = np.zeros(data.p)
    trace = TrainTrace()
    trace_data = _trace_sample(data, trace_cap, config.seed)
    trace_k = min(config.k, trace_data.n - 1)

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(data.n)
        utilities: List[float] = []
        terms: List[float] = []
        norms: List[float] = []
        for batch_id, lo in enumerate(range(0, data.n, config.batch_size)):
            idx = order[lo: lo + config.batch_size]
            event = data.event[idx]
            if idx.size < 2 or not event.any():
                trace.skipped_batches += 1
                logger.info("Epoch %d: skipping batch %d (%d records, %d events)", epoch, batch_id, idx.size, int(event.sum()))
                continue
            X = data.X[idx]
            G = input_similarity_values(X) if config.variant == "fair" and config.fairness_active else None
            obj = _objective(beta, X, data.time[idx], event, G, config, normalize=True)
            if not math.isfinite(obj.loss) or not np.all(np.isfinite(obj.grad)):
                raise NonFiniteLossError(epoch, batch_id, beta.tolist(), obj.loss)
            beta = optimizer.step(beta, obj.grad)
            utilities.append(obj.utility)
            terms.append(obj.fairness)
            norms.append(float(np.linalg.norm(obj.grad)))
        if not utilities:
            logger.warning("Epoch %d: every batch was skipped", epoch)
        trace.append(EpochRecord(
            epoch=epoch,
            utility=_mean(utilities),
            surrogate=_mean(terms),
            fndcg=model_fndcg(beta, trace_data, trace_k),
            grad_norm=_mean(norms),
        ))

    if not np.all(np.isfinite(beta)):
        raise NonFiniteLossError(config.epochs, -1, beta.tolist(), math.nan)
    model = build_model(beta, data, scaler)
    trace.final_fndcg = model_fndcg(beta, data, min(config.k, data.n - 1))
    trace.final_c_index = c_index(np.exp(data.X @ beta), data)
    logger.info(
        "Fit variant=%s gamma=%g k=%d: FNDCG@k=%.4f C-index=%.4f",
        config.variant, config.gamma, config.k, trace.final_fndcg, trace.final_c_index,
    )
    return model, trace


# --------------------------------------------------------------------------- #
#  Cross-validated cells and grid search                                       #
# --------------------------------------------------------------------------- #

def train_and_evaluate_fold(
    data: SurvivalDataset,
    folds: FoldAssignment,
    fold: int,
    config: TrainConfig,
    tie_credit: bool = False,
    grid_points: int = 100,
) -> FoldMetrics:
    """Scale on the training split, fit, evaluate on the held-out split.

    Folds whose training or held-out split has no event are returned with
    ``skipped=True``.
    """
    train_idx, test_idx = folds.train_indices(fold), folds.test_indices(fold)
    if not data.event[test_idx].any() or not data.event[train_idx].any() or test_idx.size < 2:
        logger.warning("Fold %d skipped: a split has no observed events", fold)
        return FoldMetrics(fold=fold, n_test=int(test_idx.size), skipped=True, note="no events in split")
    train, test = data.subset(train_idx), data.subset(test_idx)
    scaler = fit_scaler(train)
    train_s, test_s = apply_scaler(scaler, train), apply_scaler(scaler, test)
    model, _ = fit(train_s, config, scaler)
    k_eval = min(config.k, test_s.n - 1)
    report = evaluate(model, test_s, input_similarity(test_s), k_eval, tie_credit, grid_points)
    return FoldMetrics(
        fold=fold,
        fndcg_at_k=report.fndcg_at_k,
        c_index=report.c_index,
        brier=report.brier,
        time_dependent_auc=report.time_dependent_auc,
        n_test=test_s.n,
        failed=list(report.failed),
        note=f"k clamped to {k_eval}" if k_eval != config.k else "",
    )


@dataclass(frozen=True)
class _CellTask:
    data: SurvivalDataset
    folds: FoldAssignment
    fold: int
    config: TrainConfig
    tie_credit: bool
    grid_points: int


def _run_cell(task: _CellTask) -> Tuple[Optional[FoldMetrics], str]:
    """Worker entry point; errors come back as text so they cross process boundaries."""
    try:
        metrics = train_and_evaluate_fold(task.data, task.folds, task.fold, task.config, task.tie_credit, task.grid_points)
    except (FairSurvError, ArithmeticError, np.linalg.LinAlgError) as e:
        logger.error("Cell gamma=%g k=%d fold=%d failed: %s", task.config.gamma, task.config.k, task.fold, e)
        return None, f"{type(e).__name__}: {e}"
    return metrics, ""


def grid_search(
    data: SurvivalDataset,
    folds: FoldAssignment,
    gamma_grid: Sequence[float],
    k_grid: Sequence[int],
    template: TrainConfig,
    tie_credit: bool = False,
    grid_points: int = 100,
    workers: Optional[int] = None,
    continue_on_error: bool = False,
) -> GridTable:
    """Cross-validated metrics for every (gamma, k), rows sorted by (gamma, k).

    Cells (gamma, k, fold) run on a process pool of ``workers`` processes
    (default ``Settings.workers``). A failing cell raises GridCellError unless
    ``continue_on_error``, in which case it is recorded and the search goes on.
    """
    if not gamma_grid or not k_grid:
        raise DataValidationError("gamma and k grids must be non-empty")
    workers = workers or get_settings().workers
    keys = [(g, k, f) for g in sorted(set(gamma_grid)) for k in sorted(set(k_grid)) for f in range(folds.n_folds)]
    tasks = [
        _CellTask(data, folds, f, template.model_copy(update={"gamma": g, "k": k}), tie_credit, grid_points)
        for g, k, f in keys
    ]
    logger.info("Grid search: %d cells on %d worker(s)", len(tasks), workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, tasks))
    else:
        results = [_run_cell(t) for t in tasks]

    cells: List[GridCell] = []
    for (g, k, f), (metrics, error) in zip(keys, results):
        if error and not continue_on_error:
            raise GridCellError(g, k, f, RuntimeError(error))
        if metrics is None:
            metrics = FoldMetrics(fold=f, failed=["fit"], note=error)
        cells.append(GridCell(gamma=g, k=k, fold=f, metrics=metrics, error=error))
    return GridTable.from_cells(cells, template.variant)
