"""
Shared Test Fixtures
Canonical networks and models used across the test modules
"""

from pathlib import Path

import pytest

from src.graph_model import ColoredNetwork, complete_network, ring_network, star_network
from src.spectral_plant import model_from_sources

SCENARIO_DIR = Path(__file__).resolve().parent / "scenarios"


@pytest.fixture
def scenario_dir() -> Path:
    return SCENARIO_DIR


@pytest.fixture
def k7() -> ColoredNetwork:
    """Complete digraph on 7 nodes, one color, nothing trusted"""
    return complete_network(7)


@pytest.fixture
def k7_model():
    return model_from_sources([1.5], {0: [0, 1, 2]}, [1.0])


@pytest.fixture
def levels_network() -> ColoredNetwork:
    """
    Six sources 0..5 (node 3 trusted, nodes 2 and 4 of colors 1 and 2).
    Node 6 hears three colors, nodes 7..10 hear the trusted source, and
    node 11 only gets three active neighbors after round 1.
    """
    colors = {0: 0, 1: 0, 2: 1, 3: 0, 4: 2, 5: 0}
    colors.update({i: 0 for i in range(6, 12)})
    edges = [(0, 6), (2, 6), (4, 6),
             (3, 7), (5, 7),
             (3, 8),
             (3, 9), (1, 9),
             (3, 10),
             (0, 11), (1, 11), (6, 11), (7, 11)]
    return ColoredNetwork(12, edges, colors, trusted=[3])


@pytest.fixture
def star5() -> ColoredNetwork:
    return star_network(5)


@pytest.fixture
def ring6() -> ColoredNetwork:
    return ring_network(6)


@pytest.fixture
def negative_control() -> ColoredNetwork:
    """Node 3 relays the only source and is the sole informant of node 1"""
    return ColoredNetwork(4, [(0, 3), (3, 1), (1, 2), (3, 2)])
