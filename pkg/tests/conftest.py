"""
Shared pytest fixtures for fairsurv tests.
"""
import tempfile
from pathlib import Path

import numpy as np
import pytest


# ---------------------------------------------------------------------------
# Environment: keep every test's outputs and settings isolated
# ---------------------------------------------------------------------------

@pytest.fixture(autouse=True)
def _test_env(monkeypatch):
    """Set safe environment variables for every test."""
    monkeypatch.setenv("FAIRSURV_LOG_LEVEL", "WARNING")
    monkeypatch.setenv("FAIRSURV_OUTPUT_DIR", tempfile.mkdtemp())
    monkeypatch.setenv("FAIRSURV_WORKERS", "1")
    monkeypatch.setenv("FAIRSURV_LEDGER_ENABLED", "true")
    monkeypatch.delenv("FAIRSURV_LOG_FILE", raising=False)
    monkeypatch.delenv("FAIRSURV_SUBSAMPLE_CAP", raising=False)
    from fairsurv.core.config import get_settings
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


# ---------------------------------------------------------------------------
# Fixtures
# ---------------------------------------------------------------------------

@pytest.fixture
def tmp_dir():
    """Provide a temporary directory that is cleaned up after the test."""
    with tempfile.TemporaryDirectory() as d:
        yield Path(d)


def random_censored(n, p, seed, censor_prob=0.4):
    """Small random dataset with continuous times and at least one event."""
    from fairsurv.models.dataset import SurvivalDataset

    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    time = rng.exponential(1.0, n) + 0.01
    event = rng.random(n) >= censor_prob
    if not event.any():
        event[rng.integers(n)] = True
    return SurvivalDataset(X=X, time=time, event=event)


@pytest.fixture
def make_censored():
    """Factory: make_censored(n, p, seed, censor_prob=0.4) -> SurvivalDataset."""
    return random_censored


@pytest.fixture
def small_synthetic():
    """200 records from the exponential PH generator, 30% censoring."""
    from fairsurv.services.synthetic import generate_synthetic
    data, _ = generate_synthetic(200, 2, [1.0, -0.5], 0.3, seed=0)
    return data


@pytest.fixture
def fast_config_yaml(tmp_dir):
    """Sectioned experiment config with a short training schedule."""
    import yaml

    path = tmp_dir / "fast.yaml"
    path.write_text(yaml.safe_dump({
        "train": {"epochs": 3, "batch_size": 32, "k": 3, "surrogate_temperature": 0.5},
        "experiment": {"n_folds": 2, "brier_grid_points": 10},
    }))
    return str(path)


@pytest.fixture
def rossi_like_csv(tmp_dir):
    """A ROSSI-shaped CSV (week, arrest, nine covariates) plus its schema file."""
    rng = np.random.default_rng(7)
    n = 60
    features = ["fin", "age", "race", "wexp", "mar", "paro", "prio", "educ", "emp1"]
    cols = {
        "fin": rng.integers(0, 2, n),
        "age": rng.integers(17, 45, n),
        "race": rng.integers(0, 2, n),
        "wexp": rng.integers(0, 2, n),
        "mar": rng.integers(0, 2, n),
        "paro": rng.integers(0, 2, n),
        "prio": rng.poisson(3, n),
        "educ": rng.integers(2, 7, n),
        "emp1": rng.integers(0, 2, n),
    }
    week = rng.integers(1, 53, n)
    arrest = (rng.random(n) < 0.4).astype(int)
    arrest[0] = 1
    lines = [",".join(["week", "arrest", *features])]
    for i in range(n):
        lines.append(",".join([str(week[i]), str(arrest[i]), *[str(cols[f][i]) for f in features]]))
    csv_path = tmp_dir / "rossi.csv"
    csv_path.write_text("\n".join(lines) + "\n")

    schema_path = tmp_dir / "rossi.schema.yaml"
    schema_path.write_text(
        "name: ROSSI\ntime: week\nevent: arrest\n"
        f"features: [{', '.join(features)}]\n"
    )
    return str(csv_path), str(schema_path)
