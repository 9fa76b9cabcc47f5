"""
Configuration Management

Two layers of configuration:

1. ``Settings`` - process-level knobs (logging, worker pool, output root)
   read with Pydantic Settings from the environment and an optional .env file.
2. ``ExperimentConfig`` - a sectioned YAML document describing one experiment
   (data, train, experiment, synthetic). Command-line flags override file
   values.

CONFIGURATION SOURCES (Priority Order):
1. Command-line flags (experiment values only)
2. Environment variables, prefix FAIRSURV_
3. .env file in the working directory
4. Default values defined in this file

USAGE:
    from fairsurv.core.config import get_settings, load_experiment_config

    settings = get_settings()
    cfg = load_experiment_config("configs/rossi.yaml", {"train.gamma": 2.0})
"""
import math
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from fairsurv.core.errors import ConfigError


def _read_version() -> str:
    """Single source of truth: the repo-root VERSION file."""
    try:
        # fairsurv/core/config.py -> repo root is two parents up.
        version_file = Path(__file__).resolve().parents[2] / "VERSION"
        return version_file.read_text(encoding="utf-8").strip() or "0.0.0"
    except OSError:
        return "0.0.0"


class Settings(BaseSettings):
    """
    Process Configuration

    Type-safe settings with automatic environment variable parsing.
    All settings can be overridden via FAIRSURV_* environment variables.
    """

    # -- Logging --
    log_level: str = Field(default="INFO", description="Logging level")

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Validate log level."""
        v = v.upper()
        valid_levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        if v not in valid_levels:
            raise ValueError(f"log_level must be one of: {', '.join(valid_levels)}")
        return v

    log_file: Optional[str] = Field(default=None, description="Path to log file (None = stderr only)")
    ledger_enabled: bool = Field(default=True, description="Write JSON-lines run ledger under <out>/logs")

    # -- Execution --
    workers: int = Field(default=1, ge=1, le=64, description="Worker processes for sweep cells")

    # -- Directories --
    output_dir: str = Field(default="./runs", description="Default output root for CLI commands")

    # -- Similarity matrices --
    subsample_cap: int = Field(
        default=20_000,
        ge=2,
        description="Maximum records used to build n x n similarity matrices",
    )

    model_config = SettingsConfigDict(
        env_prefix="FAIRSURV_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )


@lru_cache()
def get_settings() -> Settings:
    """Get process settings (cached singleton)."""
    return Settings()


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

Variant = Literal["fair", "lipschitz", "plain"]


class TrainConfig(BaseModel):
    """Hyper-parameters of one fairness-regularized Cox fit."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    gamma: float = Field(default=1.0, ge=0.0, description="Fairness weight in the unified objective")
    k: int = Field(default=10, ge=1, description="Length of the ranked neighbour list")
    learning_rate: float = Field(default=0.01, gt=0.0)
    epochs: int = Field(default=50, ge=1)
    batch_size: int = Field(default=128, ge=2)
    surrogate_temperature: float = Field(default=1.0, gt=0.0, description="Sigmoid temperature of the soft ranks")
    seed: int = 0
    variant: Variant = "fair"
    lipschitz_L: float = Field(default=1.0, gt=0.0, description="Lipschitz constant (variant=lipschitz only)")
    ridge: float = Field(default=0.0, ge=0.0, description="Ridge penalty on beta")
    adam_beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    adam_beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    adam_epsilon: float = Field(default=1e-8, gt=0.0)

    @field_validator("gamma", "learning_rate", "surrogate_temperature", "lipschitz_L")
    @classmethod
    def validate_finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("must be finite")
        return v

    @property
    def fairness_active(self) -> bool:
        """True when the fairness term contributes to the objective."""
        return self.variant != "plain" and self.gamma > 0.0


class DatasetSchema(BaseModel):
    """Column-role mapping for a survival CSV."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    name: Optional[str] = None
    time: str
    event: str
    features: List[str] = Field(min_length=1)

    @model_validator(mode="after")
    def validate_distinct(self) -> "DatasetSchema":
        roles = [self.time, self.event, *self.features]
        if len(set(roles)) != len(roles):
            raise ValueError("time, event and feature columns must be distinct")
        return self


def load_schema(path: str) -> DatasetSchema:
    """Load a dataset schema YAML file (see schemas/)."""
    doc = _read_yaml(Path(path))
    try:
        return DatasetSchema(**doc)
    except ValidationError as e:
        raise ConfigError(f"Invalid schema file {path}: {e}") from e


# ---------------------------------------------------------------------------
# Experiment
# ---------------------------------------------------------------------------

GAMMA_GRID_DEFAULT = [math.exp(e) for e in range(-4, 5)]
K_GRID_DEFAULT = [4, 7, 10, 15, 20, 30, 50]


class DataSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    path: Optional[str] = None
    schema_file: Optional[str] = None
    dataset_schema: Optional[DatasetSchema] = Field(default=None, alias="schema")

    def resolve_schema(self) -> DatasetSchema:
        if self.dataset_schema is not None:
            return self.dataset_schema
        if self.schema_file:
            return load_schema(self.schema_file)
        raise ConfigError("data section needs either 'schema' or 'schema_file'")


class ExperimentSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_folds: int = Field(default=5, ge=2)
    gamma_grid: List[float] = Field(default_factory=lambda: list(GAMMA_GRID_DEFAULT))
    k_grid: List[int] = Field(default_factory=lambda: list(K_GRID_DEFAULT))
    output_dir: Optional[str] = None
    subsample_cap: Optional[int] = Field(default=None, ge=2)
    tie_credit: bool = False
    include_plain: bool = False
    brier_grid_points: int = Field(default=100, ge=1)

    @field_validator("gamma_grid", "k_grid")
    @classmethod
    def validate_non_empty(cls, v: list) -> list:
        if not v:
            raise ValueError("grids must be non-empty")
        return v

    @field_validator("gamma_grid")
    @classmethod
    def validate_gammas(cls, v: List[float]) -> List[float]:
        if any(g < 0 for g in v):
            raise ValueError("gamma values must be non-negative")
        return v

    @field_validator("k_grid")
    @classmethod
    def validate_ks(cls, v: List[int]) -> List[int]:
        if any(k < 1 for k in v):
            raise ValueError("k values must be >= 1")
        return v


class SyntheticSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n: int = Field(default=2000, ge=2)
    p: int = Field(default=2, ge=1)
    beta_true: List[float] = Field(default_factory=lambda: [1.0, -0.5])
    censor_rate: float = Field(default=0.3, gt=0.0, lt=1.0)
    misaligned: bool = False
    seed: int = 0

    @model_validator(mode="after")
    def validate_dimension(self) -> "SyntheticSection":
        if not self.misaligned and len(self.beta_true) != self.p:
            raise ValueError(f"beta_true has {len(self.beta_true)} entries, p={self.p}")
        return self


class ExperimentConfig(BaseModel):
    """One experiment: dataset, training hyper-parameters, protocol."""

    model_config = ConfigDict(extra="forbid")

    data: DataSection = Field(default_factory=DataSection)
    train: TrainConfig = Field(default_factory=TrainConfig)
    experiment: ExperimentSection = Field(default_factory=ExperimentSection)
    synthetic: SyntheticSection = Field(default_factory=SyntheticSection)

    def output_root(self, settings: Optional[Settings] = None) -> Path:
        settings = settings or get_settings()
        return Path(self.experiment.output_dir or settings.output_dir)

    def effective_subsample_cap(self, settings: Optional[Settings] = None) -> int:
        settings = settings or get_settings()
        return self.experiment.subsample_cap or settings.subsample_cap


def _read_yaml(path: Path) -> Dict[str, Any]:
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"Could not parse {path}: {e}") from e
    if not isinstance(doc, dict):
        raise ConfigError(f"{path} must contain a mapping at the top level")
    return doc


def apply_overrides(doc: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """Merge dotted ``section.key`` overrides into a sectioned document.

    None values are ignored so unset flags never clobber file values.
    """
    merged = {section: dict(values or {}) for section, values in doc.items()}
    for dotted, value in overrides.items():
        if value is None:
            continue
        section, _, key = dotted.partition(".")
        if not key:
            raise ConfigError(f"Override '{dotted}' must be of the form section.key")
        merged.setdefault(section, {})[key] = value
    return merged


def load_experiment_config(
    path: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> ExperimentConfig:
    """Build an ExperimentConfig from an optional YAML file plus overrides.

    Raises:
        ConfigError: missing/unparseable file or invalid values
    """
    doc = _read_yaml(Path(path)) if path else {}
    unknown = set(doc) - {"data", "train", "experiment", "synthetic"}
    if unknown:
        raise ConfigError(f"Unknown config sections: {', '.join(sorted(unknown))}")
    merged = apply_overrides(doc, overrides or {})
    try:
        return ExperimentConfig(**merged)
    except ValidationError as e:
        raise ConfigError(f"Invalid experiment config: {e}") from e
