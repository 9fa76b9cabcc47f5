"""
fairsurv - fairness-aware survival analysis

Cox proportional hazards with a rank-based individual-fairness regularizer,
censoring-aware evaluation and a cross-validated experiment harness.

Layers:
  1. CLI - cli/ (fit, evaluate, sweep, ablation, synth, describe)
  2. Core - core/ (config, errors, run ledger, logging)
  3. Domain Models - models/ (datasets, Cox model, similarity, reports)
  4. Services - services/ (ingestion, survival, fairness, training, evaluation)
"""

from fairsurv.core.config import _read_version

__version__ = _read_version()
__author__ = "fairsurv developers"

from fairsurv.core.config import TrainConfig, get_settings
from fairsurv.models.dataset import SurvivalDataset

__all__ = [
    "TrainConfig",
    "SurvivalDataset",
    "get_settings",
]
