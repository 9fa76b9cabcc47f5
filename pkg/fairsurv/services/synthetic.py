"""
Synthetic censored data from an exponential proportional-hazards model.

Event times: T = E / exp(beta^T x), E ~ Exp(1) (baseline hazard h0 = 1).
Censoring:   C = E' / lam, E' ~ Exp(1), independent of T. A record is
             censored when C < T, i.e. when lam > E' / T, so the realized
             censored count is a step function of lam. lam is placed between
             consecutive order statistics of E' / T to censor exactly
             round(censor_rate * n) records (at most n - 1).
Observed:    (min(T, C), T <= C).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from fairsurv.core.errors import DataValidationError
from fairsurv.models.dataset import SurvivalDataset

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GroundTruth:
    """Generation parameters written next to a synthetic dataset."""
    beta_true: List[float]
    censor_rate_target: float
    censor_rate_realized: float
    censoring_rate_parameter: float
    baseline_hazard: float
    seed: int
    generator: str

    def to_dict(self) -> Dict[str, object]:
        return dict(self.__dict__)


def solve_censoring_rate(event_time: np.ndarray, censor_unit: np.ndarray, censor_rate: float) -> float:
    """Censoring rate lam for which ``censor_unit / lam < event_time`` holds for
    exactly round(censor_rate * n) records, clamped so one event remains."""
    thresholds = np.sort(np.asarray(censor_unit, dtype=np.float64) / np.asarray(event_time, dtype=np.float64))
    n = thresholds.shape[0]
    m = min(int(round(censor_rate * n)), n - 1)
    if m == 0:
        return float(thresholds[0] / 2.0)
    return float(np.sqrt(thresholds[m - 1] * thresholds[m]))


def _censor(eta: np.ndarray, censor_rate: float, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray, float]:
    event_time = rng.standard_exponential(eta.shape[0]) / np.exp(eta)
    censor_unit = rng.standard_exponential(eta.shape[0])
    lam = solve_censoring_rate(event_time, censor_unit, censor_rate)
    censor_time = censor_unit / lam
    event = event_time <= censor_time
    time = np.minimum(event_time, censor_time)
    return time, event, lam


def generate_synthetic(
    n: int,
    p: int,
    beta_true: Sequence[float],
    censor_rate: float,
    seed: int,
) -> Tuple[SurvivalDataset, GroundTruth]:
    """Standard-normal features, exponential PH event times, tuned censoring."""
    beta = np.asarray(beta_true, dtype=np.float64)
    if beta.shape != (p,):
        raise DataValidationError(f"beta_true has {beta.size} entries, p={p}")
    if not 0.0 < censor_rate < 1.0:
        raise DataValidationError(f"censor_rate must lie in (0, 1), got {censor_rate}")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    time, event, lam = _censor(X @ beta, censor_rate, rng)
    data = SurvivalDataset(X=X, time=time, event=event, feature_names=tuple(f"x{j}" for j in range(p)))
    truth = GroundTruth(
        beta_true=beta.tolist(),
        censor_rate_target=censor_rate,
        censor_rate_realized=data.censor_rate,
        censoring_rate_parameter=lam,
        baseline_hazard=1.0,
        seed=seed,
        generator="exponential_ph",
    )
    logger.info("Generated synthetic n=%d p=%d censored=%.3f", n, p, data.censor_rate)
    return data, truth


def generate_misaligned(
    n: int,
    seed: int,
    n_latent_copies: int = 4,
    latent_noise: float = 0.2,
    risk_weight: float = 1.0,
    latent_weight: float = 0.6,
    censor_rate: float = 0.3,
) -> Tuple[SurvivalDataset, GroundTruth]:
    """Planted similarity/risk misalignment.

    ``n_latent_copies`` noisy copies of a latent factor z dominate Euclidean
    input distances, while the hazard is driven mostly by an independent
    feature u: eta = risk_weight * u + latent_weight * z. Risk-ranked neighbours
    of plain CPH therefore disagree with input-space neighbours.
    """
    if n_latent_copies < 1:
        raise DataValidationError("n_latent_copies must be >= 1")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n)
    u = rng.standard_normal(n)
    copies = z[:, None] + latent_noise * rng.standard_normal((n, n_latent_copies))
    X = np.column_stack([copies, u])
    time, event, lam = _censor(risk_weight * u + latent_weight * z, censor_rate, rng)
    names = tuple(f"z{j}" for j in range(n_latent_copies)) + ("u",)
    data = SurvivalDataset(X=X, time=time, event=event, feature_names=names)
    beta_true = [latent_weight / n_latent_copies] * n_latent_copies + [risk_weight]
    truth = GroundTruth(
        beta_true=beta_true,
        censor_rate_target=censor_rate,
        censor_rate_realized=data.censor_rate,
        censoring_rate_parameter=lam,
        baseline_hazard=1.0,
        seed=seed,
        generator="misaligned",
    )
    return data, truth
