"""Shared fixtures for unit tests."""

import pytest

from src.core.metric_packing import greedy_packing
from src.core.sphere_measure import sample_boundary


@pytest.fixture
def candidates(covering):
    """Candidate cloud for packings on the boundary of M_1."""
    return sample_boundary(covering, seed=3, count=600)


@pytest.fixture
def packing_k8(candidates, covering):
    """Greedy packing at r = 1/sqrt(8) over the candidate cloud."""
    return greedy_packing(candidates, 8**-0.5, covering)


@pytest.fixture
def probes(covering):
    return sample_boundary(covering, seed=5, count=500).points
