import math

import numpy as np
import pytest

from core.dictionary import build_grid_degrees, build_receiver_dictionary
from core.experiment import ExperimentConfig
from core.optics import ReceiverSpec


@pytest.fixture(scope="session")
def receiver():
    return ReceiverSpec.default()


@pytest.fixture(scope="session")
def grid():
    return build_grid_degrees()


@pytest.fixture(scope="session")
def dictionary(receiver, grid):
    """The shipped 64-cell, 301-angle dictionary, built once per session."""
    return build_receiver_dictionary(receiver, grid)


@pytest.fixture
def small_cfg():
    """Default receiver with few snapshots and trials so trials run quickly."""
    return ExperimentConfig(num_snapshots=128, num_trials=2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def snap_to_grid(grid):
    """Grid angles closest to the given degrees."""
    def snap(degrees):
        return np.array([grid.angles[grid.nearest_index(math.radians(d))] for d in degrees])
    return snap
