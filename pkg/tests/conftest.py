import numpy as np
import pytest

from excise import Path


@pytest.fixture
def six_node_bridge():
    """Hand bridge with one excisable excursion on (0.1, 0.3)."""
    return Path(np.array([0.0, 0.1, 0.2, 0.3, 0.5, 1.0]),
                np.array([0.0, 0.5, 0.0, 0.5, 1.0, 0.0]), "bridge")


@pytest.fixture
def tent_bridge():
    return Path(np.array([0.0, 0.5, 1.0]),
                np.array([0.0, 0.5, 0.0]), "bridge")


@pytest.fixture
def w_bridge():
    return Path(np.array([0.0, 0.25, 0.5, 0.75, 1.0]),
                np.array([0.0, 0.4, 0.1, 0.5, 0.0]), "bridge")


@pytest.fixture
def meander_fixture():
    """Hand meander-type path: gamma_half = 0.2, one phase-2 excursion on
    (0.3, 0.5) with min 0.45 <= 0.5, so tau = 0.8 after excision."""
    return Path(np.array([0.0, 0.2, 0.3, 0.4, 0.5, 1.0]),
                np.array([0.0, 0.5, 0.8, 0.45, 0.8, 1.0]), "meander_type")
