"""
Cox proportional-hazards core.

Risk sets follow the partial likelihood literally: R(T_i) = {j : T_j >= T_i}.
Tied event times use Breslow's approximation (every tied individual is in each
tied event's risk set). Sums over risk sets are suffix sums over records
sorted by time, computed with log-sum-exp stabilisation so unscaled features
do not overflow exp(beta^T x).

All functions are pure; the ``*_arrays`` variants work on raw arrays so the
training loop can evaluate mini-batches without building datasets.
"""
from __future__ import annotations

import logging
from typing import Optional, Tuple

import numpy as np

from fairsurv.core.errors import DataValidationError, UndefinedLikelihoodError
from fairsurv.models.cox import CoxModel, RiskScores, StepFunction
from fairsurv.models.dataset import FeatureScaler, SurvivalDataset

logger = logging.getLogger(__name__)


def risk_scores(model: CoxModel, data: SurvivalDataset) -> RiskScores:
    """exp(beta^T x_i) for every record."""
    data.check_dimension(model.p)
    return RiskScores(np.exp(data.X @ model.beta))


# --------------------------------------------------------------------------- #
#  Partial likelihood                                                          #
# --------------------------------------------------------------------------- #

def _risk_set_starts(time: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Time-sorted order and, per record, the first sorted position of its risk set."""
    order = np.argsort(time, kind="stable")
    start = np.searchsorted(time[order], time, side="left")
    return order, start


def _suffix_logsumexp(values: np.ndarray) -> np.ndarray:
    return np.logaddexp.accumulate(values[::-1])[::-1]


def _check_events(event: np.ndarray) -> None:
    if not np.any(event):
        raise UndefinedLikelihoodError("partial likelihood is undefined without observed events")


def nll_arrays(beta: np.ndarray, X: np.ndarray, time: np.ndarray, event: np.ndarray, ridge: float = 0.0) -> float:
    _check_events(event)
    eta = X @ beta
    order, start = _risk_set_starts(time)
    log_denominator = _suffix_logsumexp(eta[order])[start]
    value = -float(np.sum(eta[event] - log_denominator[event]))
    if ridge:
        value += ridge * float(beta @ beta)
    return value


def _risk_set_means(eta: np.ndarray, X: np.ndarray, time: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    order, start = _risk_set_starts(time)
    w = np.exp(eta - eta.max())[order]
    Xs = X[order]
    S0 = np.cumsum(w[::-1])[::-1]
    S1 = np.cumsum((w[:, None] * Xs)[::-1], axis=0)[::-1]
    return order, start, S0, S1


def nll_gradient_arrays(beta: np.ndarray, X: np.ndarray, time: np.ndarray, event: np.ndarray, ridge: float = 0.0) -> np.ndarray:
    _check_events(event)
    eta = X @ beta
    _, start, S0, S1 = _risk_set_means(eta, X, time)
    s = start[event]
    means = S1[s] / S0[s][:, None]
    grad = -np.sum(X[event] - means, axis=0)
    if ridge:
        grad = grad + 2.0 * ridge * beta
    return grad


def nll_hessian_arrays(beta: np.ndarray, X: np.ndarray, time: np.ndarray, event: np.ndarray, ridge: float = 0.0) -> np.ndarray:
    _check_events(event)
    eta = X @ beta
    order, start, S0, S1 = _risk_set_means(eta, X, time)
    w = np.exp(eta - eta.max())[order]
    Xs = X[order]
    S2 = np.cumsum((w[:, None, None] * Xs[:, :, None] * Xs[:, None, :])[::-1], axis=0)[::-1]
    s = start[event]
    means = S1[s] / S0[s][:, None]
    second = S2[s] / S0[s][:, None, None]
    H = np.sum(second - means[:, :, None] * means[:, None, :], axis=0)
    if ridge:
        H = H + 2.0 * ridge * np.eye(beta.shape[0])
    return H


def neg_log_partial_likelihood(beta: np.ndarray, data: SurvivalDataset, ridge: float = 0.0) -> float:
    """-sum_{i: delta_i} (beta^T x_i - log sum_{j: T_j >= T_i} exp(beta^T x_j)) + ridge * |beta|^2."""
    beta = np.asarray(beta, dtype=np.float64)
    data.check_dimension(beta.shape[0])
    return nll_arrays(beta, data.X, data.time, data.event, ridge)


def nll_gradient(beta: np.ndarray, data: SurvivalDataset, ridge: float = 0.0) -> np.ndarray:
    beta = np.asarray(beta, dtype=np.float64)
    data.check_dimension(beta.shape[0])
    return nll_gradient_arrays(beta, data.X, data.time, data.event, ridge)


def nll_hessian(beta: np.ndarray, data: SurvivalDataset, ridge: float = 0.0) -> np.ndarray:
    beta = np.asarray(beta, dtype=np.float64)
    data.check_dimension(beta.shape[0])
    return nll_hessian_arrays(beta, data.X, data.time, data.event, ridge)


# --------------------------------------------------------------------------- #
#  Baseline hazard and survival                                                #
# --------------------------------------------------------------------------- #

def breslow_baseline(beta: np.ndarray, data: SurvivalDataset) -> StepFunction:
    """Breslow cumulative baseline hazard H0(t) = sum_{t_i <= t} d_i / sum_{T_j >= t_i} exp(beta^T x_j)."""
    beta = np.asarray(beta, dtype=np.float64)
    data.check_dimension(beta.shape[0])
    _check_events(data.event)
    eta = data.X @ beta
    order = np.argsort(data.time, kind="stable")
    t_sorted = data.time[order]
    log_denominator = _suffix_logsumexp(eta[order])
    event_times, deaths = np.unique(data.time[data.event], return_counts=True)
    first = np.searchsorted(t_sorted, event_times, side="left")
    jumps = np.exp(np.log(deaths) - log_denominator[first])
    return StepFunction(event_times, np.cumsum(jumps), initial=0.0)


def build_model(beta: np.ndarray, data: SurvivalDataset, scaler: Optional[FeatureScaler] = None) -> CoxModel:
    return CoxModel(
        beta=np.asarray(beta, dtype=np.float64),
        baseline_hazard=breslow_baseline(beta, data),
        scaler=scaler,
        feature_names=data.feature_names,
    )


def survival_function(model: CoxModel, x: np.ndarray, t: float) -> float:
    """S(t|x) = exp(-H0(t) exp(beta^T x))."""
    if t < 0:
        raise DataValidationError(f"survival_function needs t >= 0, got {t}")
    eta = float(model.linear_predictor(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])
    return float(np.exp(-model.baseline_hazard(t) * np.exp(eta)))


def kaplan_meier(times: np.ndarray, events: np.ndarray) -> StepFunction:
    """Product-limit estimator; S(0) = 1, flat when nothing is observed."""
    times = np.asarray(times, dtype=np.float64).reshape(-1)
    events = np.asarray(events).reshape(-1).astype(bool)
    if times.size == 0:
        raise DataValidationError("kaplan_meier needs at least one observation")
    if times.shape != events.shape:
        raise DataValidationError("times and events differ in length")
    if not (times > 0).all():
        raise DataValidationError("kaplan_meier needs positive times")
    event_times, deaths = np.unique(times[events], return_counts=True)
    at_risk = times.size - np.searchsorted(np.sort(times), event_times, side="left")
    surv = np.cumprod(1.0 - deaths / at_risk)
    return StepFunction(event_times, surv, initial=1.0)


# --------------------------------------------------------------------------- #
#  Reference fit                                                               #
# --------------------------------------------------------------------------- #

def fit_newton(
    data: SurvivalDataset,
    ridge: float = 0.0,
    tol: float = 1e-10,
    max_iter: int = 100,
    scaler: Optional[FeatureScaler] = None,
) -> CoxModel:
    """Plain Cox fit by Newton-Raphson with step halving (full-data risk sets)."""
    beta = np.zeros(data.p)
    value = neg_log_partial_likelihood(beta, data, ridge)
    for iteration in range(max_iter):
        grad = nll_gradient(beta, data, ridge)
        step = np.linalg.solve(nll_hessian(beta, data, ridge), grad)
        scale = 1.0
        while True:
            candidate = beta - scale * step
            cand_value = neg_log_partial_likelihood(candidate, data, ridge)
            if cand_value <= value or scale < 1e-10:
                break
            scale *= 0.5
        beta, previous = candidate, value
        value = cand_value
        if abs(previous - value) < tol and np.linalg.norm(grad) < 1e-6:
            logger.debug("Newton converged after %d iterations", iteration + 1)
            break
    return build_model(beta, data, scaler)
