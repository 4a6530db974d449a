"""Shared fixtures for integration tests.

Provides the compiled pipeline graph and a prepared series context.
"""

import pytest

from src.core.inner_builder import SeriesContext
from src.inner_graph import create_inner_graph


@pytest.fixture
def inner_graph():
    """Compiled build-inner graph."""
    return create_inner_graph({"configurable": {}})


@pytest.fixture
def series_context(small_config):
    """Seeded samples, probes and candidates for the small configuration."""
    return SeriesContext.prepare(small_config)
