"""Shared fixtures: small graphs and synthetic datasets."""

import numpy as np
import pytest

from src.gala.data_io import sbm_generate
from src.gala.graph_ops import Graph
from src.gala.models import SbmSpec
from tests.helpers import cycle_graph


@pytest.fixture
def path2() -> Graph:
    return Graph.from_edges(2, [(0, 1)])


@pytest.fixture
def triangle() -> Graph:
    return Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def square() -> Graph:
    return cycle_graph(4)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def small_sbm():
    """Three blocks of 20 nodes."""
    return sbm_generate(SbmSpec(block_sizes=[20, 20, 20], p_in=0.3, p_out=0.02, noise=0.3, seed=3))
