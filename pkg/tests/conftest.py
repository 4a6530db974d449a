"""Pytest configuration and shared fixtures for the covering-inner tests."""

import numpy as np
import pytest

from src.core.config import RunConfig
from src.core.covering_domain import CoveringMap
from src.core.sphere_measure import sample_boundary


@pytest.fixture(autouse=True)
def reset_settings(monkeypatch):
    """Clear the settings singleton so every test sees its own environment."""
    import src.core.config

    monkeypatch.delenv("INNER_OUTPUT_DIR", raising=False)
    monkeypatch.delenv("INNER_LOG_LEVEL", raising=False)
    src.core.config._settings = None
    yield
    src.core.config._settings = None


@pytest.fixture
def covering():
    """The identity covering q = 1 (M_1 is the unit ball)."""
    return CoveringMap(1)


@pytest.fixture
def covering_q2():
    """Two-sheeted covering f(z1, z2) = (z1, z2^2)."""
    return CoveringMap(2)


@pytest.fixture
def samples_q2(covering_q2):
    """A small sigma_M sample on the boundary of M_2."""
    return sample_boundary(covering_q2, seed=11, count=4000)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_config(tmp_path):
    """Run configuration small enough for a single series step in a unit test.

    Returns:
        RunConfig with tiny point sets writing under tmp_path
    """
    return RunConfig(
        q=1,
        seed=7,
        sample_count=1500,
        probe_count=400,
        candidate_count=800,
        k=8,
        sign_trials=8,
        rotation_trials=2,
        budget=1,
        phase_grid=8,
        max_damping=2,
        output_dir=tmp_path / "runs",
    )
