"""
Individual-fairness measures for Cox models.

Input space:  Sim_in(i, j)  = exp(-||x_i - x_j||)
Output space: Sim_out(i, j) = (1 - |C_i - C_j|) * exp(-|r_i - r_j|)

where r = exp(beta^T x) are risk scores and C is the per-individual
concordance. FNDCG@k compares, for every anchor, the DCG of input-space gains
taken in output-space order against the ideal (input-space) order.

Rankings exclude the anchor and break similarity ties by ascending index.
Anchor-wise work is done in row blocks so held-out sets of a few thousand
records never materialise more than ``block_rows x n`` temporaries at once.
"""
from __future__ import annotations

import logging
import struct
from pathlib import Path
from typing import Tuple, Union

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from fairsurv.core.errors import DataValidationError, MetricUndefinedError
from fairsurv.models.cox import RiskScores
from fairsurv.models.dataset import SurvivalDataset
from fairsurv.models.similarity import (
    ConcordanceVector,
    RankedList,
    SimilarityKind,
    SimilarityMatrix,
)

logger = logging.getLogger(__name__)

BLOCK_ROWS = 512

ScoresLike = Union[RiskScores, np.ndarray]


def _scores(scores: ScoresLike) -> np.ndarray:
    if isinstance(scores, RiskScores):
        return scores.values
    return np.asarray(scores, dtype=np.float64).reshape(-1)


# --------------------------------------------------------------------------- #
#  Similarity matrices                                                         #
# --------------------------------------------------------------------------- #

def input_similarity_values(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return np.exp(-squareform(pdist(X, metric="euclidean")))


def input_similarity(data: SurvivalDataset) -> SimilarityMatrix:
    """Euclidean input similarity on (already scaled) features."""
    return SimilarityMatrix(input_similarity_values(data.X), SimilarityKind.INPUT)


def output_similarity_raw(scores: ScoresLike) -> SimilarityMatrix:
    r = _scores(scores)
    return SimilarityMatrix(np.exp(-np.abs(np.subtract.outer(r, r))), SimilarityKind.OUTPUT)


def concordance_counts(
    scores: ScoresLike,
    time: np.ndarray,
    event: np.ndarray,
    block_rows: int = BLOCK_ROWS,
) -> Tuple[np.ndarray, np.ndarray]:
    """Per-individual (concordant pairs, comparable pairs).

    A pair is comparable when its shorter member has an observed event; pairs
    with tied times are not comparable. It is concordant when the longer
    member has the strictly lower risk.
    """
    r = _scores(scores)
    time = np.asarray(time, dtype=np.float64)
    event = np.asarray(event, dtype=bool)
    n = r.shape[0]
    num = np.zeros(n, dtype=np.int64)
    cnt = np.zeros(n, dtype=np.int64)
    for lo in range(0, n, block_rows):
        hi = min(lo + block_rows, n)
        # rows: shorter member a, columns: longer member b
        comp = (time[lo:hi, None] < time[None, :]) & event[lo:hi, None]
        conc = comp & (r[None, :] < r[lo:hi, None])
        cnt[lo:hi] += comp.sum(axis=1)
        cnt += comp.sum(axis=0)
        num[lo:hi] += conc.sum(axis=1)
        num += conc.sum(axis=0)
    return num, cnt


def individual_concordance(scores: ScoresLike, data: SurvivalDataset) -> ConcordanceVector:
    """Fraction of each individual's comparable pairs that the model orders correctly."""
    num, cnt = concordance_counts(scores, data.time, data.event)
    defined = cnt > 0
    values = np.zeros(num.shape[0], dtype=np.float64)
    values[defined] = num[defined] / cnt[defined]
    undefined = int((~defined).sum())
    if undefined:
        logger.warning("%d individuals have no comparable pairs; concordance set to 0", undefined)
    return ConcordanceVector(values=values, defined=defined)


def output_similarity_adjusted(raw: SimilarityMatrix, conc: ConcordanceVector) -> SimilarityMatrix:
    if raw.n != len(conc):
        raise DataValidationError(f"similarity has {raw.n} rows, concordance {len(conc)} entries")
    c = conc.values
    penalty = 1.0 - np.abs(np.subtract.outer(c, c))
    return SimilarityMatrix(penalty * raw.values, SimilarityKind.OUTPUT)


def output_similarity(scores: ScoresLike, data: SurvivalDataset) -> SimilarityMatrix:
    """Concordance-adjusted output similarity."""
    return output_similarity_adjusted(output_similarity_raw(scores), individual_concordance(scores, data))


# --------------------------------------------------------------------------- #
#  Rankings and DCG                                                            #
# --------------------------------------------------------------------------- #

def ranked_rows(values: np.ndarray, anchors: np.ndarray) -> np.ndarray:
    """Ranked neighbour indices (anchor last) for a block of similarity rows."""
    keyed = -np.asarray(values, dtype=np.float64)
    keyed[np.arange(anchors.shape[0]), anchors] = np.inf
    return np.argsort(keyed, axis=1, kind="stable")


def rank_by_similarity(sim: SimilarityMatrix, anchor: int) -> RankedList:
    """Other records by descending similarity to ``anchor``; ties by ascending index."""
    if sim.n < 2:
        raise DataValidationError("ranking needs at least 2 records")
    order = ranked_rows(sim.row(anchor)[None, :], np.array([anchor]))[0, : sim.n - 1]
    return RankedList(anchor=anchor, order=order)


def discounts(k: int) -> np.ndarray:
    """1 / log2(pos + 1) for pos = 1..k."""
    return 1.0 / np.log2(np.arange(2, k + 2, dtype=np.float64))


def _check_k(k: int, n: int) -> None:
    if not 1 <= k <= n - 1:
        raise DataValidationError(f"k must lie in [1, {n - 1}], got {k}")


def dcg_at_k(order: RankedList, gains: np.ndarray, k: int) -> float:
    """sum_{pos<=k} gains[order[pos]] / log2(pos + 1)."""
    _check_k(k, order.order.shape[0] + 1)
    gains = np.asarray(gains, dtype=np.float64)
    return float(gains[order.top(k)] @ discounts(k))


def fndcg_per_anchor(
    sim_in: SimilarityMatrix,
    sim_out: SimilarityMatrix,
    k: int,
    block_rows: int = BLOCK_ROWS,
) -> np.ndarray:
    """Per-anchor DCG(output order) / DCG(ideal order); NaN where the ideal DCG is 0."""
    if sim_in.n != sim_out.n:
        raise DataValidationError(f"similarity matrices differ in size: {sim_in.n} vs {sim_out.n}")
    n = sim_in.n
    _check_k(k, n)
    disc = discounts(k)
    ratios = np.empty(n, dtype=np.float64)
    for lo in range(0, n, block_rows):
        anchors = np.arange(lo, min(lo + block_rows, n))
        gains = sim_in.values[anchors]
        ideal_order = ranked_rows(gains, anchors)[:, :k]
        out_order = ranked_rows(sim_out.values[anchors], anchors)[:, :k]
        ideal = np.take_along_axis(gains, ideal_order, axis=1) @ disc
        actual = np.take_along_axis(gains, out_order, axis=1) @ disc
        with np.errstate(invalid="ignore", divide="ignore"):
            ratios[anchors] = np.where(ideal > 0, actual / ideal, np.nan)
    skipped = int(np.isnan(ratios).sum())
    if skipped:
        logger.warning("Skipping %d anchors with zero ideal DCG", skipped)
    return ratios


def fndcg_at_k(sim_in: SimilarityMatrix, sim_out: SimilarityMatrix, k: int) -> float:
    """Mean per-anchor FNDCG@k in (0, 1]; higher is fairer."""
    ratios = fndcg_per_anchor(sim_in, sim_out, k)
    valid = ratios[~np.isnan(ratios)]
    if valid.size == 0:
        raise MetricUndefinedError("FNDCG@k undefined: every anchor has zero ideal DCG")
    return float(np.mean(valid))


def model_fndcg(
    beta: np.ndarray,
    data: SurvivalDataset,
    k: int,
    block_rows: int = BLOCK_ROWS,
) -> float:
    """Exact FNDCG@k of linear predictor ``beta`` on ``data`` without n x n matrices.

    Builds the same rows as input_similarity / output_similarity one block at
    a time; results equal fndcg_at_k on the full matrices.
    """
    X = data.X
    r = np.exp(X @ np.asarray(beta, dtype=np.float64))
    num, cnt = concordance_counts(r, data.time, data.event, block_rows)
    c = np.where(cnt > 0, num / np.maximum(cnt, 1), 0.0)
    n = data.n
    _check_k(k, n)
    disc = discounts(k)
    total = 0.0
    valid = 0
    for lo in range(0, n, block_rows):
        anchors = np.arange(lo, min(lo + block_rows, n))
        gains = np.exp(-cdist(X[anchors], X, metric="euclidean"))
        out = (1.0 - np.abs(c[anchors, None] - c[None, :])) * np.exp(-np.abs(r[anchors, None] - r[None, :]))
        ideal = np.take_along_axis(gains, ranked_rows(gains, anchors)[:, :k], axis=1) @ disc
        actual = np.take_along_axis(gains, ranked_rows(out, anchors)[:, :k], axis=1) @ disc
        ok = ideal > 0
        total += float(np.sum(actual[ok] / ideal[ok]))
        valid += int(ok.sum())
    if valid == 0:
        raise MetricUndefinedError("FNDCG@k undefined: every anchor has zero ideal DCG")
    return total / valid


# --------------------------------------------------------------------------- #
#  Lipschitz condition                                                         #
# --------------------------------------------------------------------------- #

def lipschitz_penalty(X: np.ndarray, scores: ScoresLike, L: float) -> float:
    """Mean over unordered pairs of max(0, |r_a - r_b| - L ||x_a - x_b||)."""
    if not L > 0:
        raise DataValidationError(f"L must be positive, got {L}")
    r = _scores(scores)
    dist = pdist(np.asarray(X, dtype=np.float64), metric="euclidean")
    gap = pdist(r[:, None], metric="cityblock")
    return float(np.mean(np.maximum(0.0, gap - L * dist)))


def lipschitz_penalty_gradient(beta: np.ndarray, X: np.ndarray, L: float) -> Tuple[float, np.ndarray]:
    """Penalty at r = exp(X beta) and its (sub)gradient with respect to beta."""
    X = np.asarray(X, dtype=np.float64)
    r = np.exp(X @ beta)
    n = X.shape[0]
    diff = np.subtract.outer(r, r)
    excess = np.abs(diff) - L * squareform(pdist(X, metric="euclidean"))
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    violated = (excess > 0) & upper
    n_pairs = n * (n - 1) / 2
    value = float(np.sum(excess[violated]) / n_pairs)
    s = np.sign(diff) * violated
    grad = ((s.sum(axis=1) - s.sum(axis=0)) * r) @ X / n_pairs
    return value, grad


# --------------------------------------------------------------------------- #
#  Debug export                                                                #
# --------------------------------------------------------------------------- #

_MAGIC = b"FSIM"
_FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQB")
_KIND_CODES = {SimilarityKind.INPUT: 0, SimilarityKind.OUTPUT: 1}


def export_similarity(matrix: SimilarityMatrix, path: str) -> None:
    """Write header (magic, version, n, kind) then n*n little-endian float64, row-major."""
    header = _HEADER.pack(_MAGIC, _FORMAT_VERSION, matrix.n, _KIND_CODES[matrix.kind])
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(header + np.ascontiguousarray(matrix.values, dtype="<f8").tobytes())


def read_similarity(path: str) -> SimilarityMatrix:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise DataValidationError(f"{path}: truncated similarity header")
    magic, version, n, code = _HEADER.unpack_from(blob)
    if magic != _MAGIC or version != _FORMAT_VERSION:
        raise DataValidationError(f"{path}: not a similarity export (magic={magic!r}, version={version})")
    kinds = {v: k for k, v in _KIND_CODES.items()}
    if code not in kinds:
        raise DataValidationError(f"{path}: unknown similarity kind code {code}")
    body = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size)
    if body.size != n * n:
        raise DataValidationError(f"{path}: expected {n * n} values, found {body.size}")
    return SimilarityMatrix(body.reshape(n, n).astype(np.float64), kinds[code])
