"""Shared fixtures: a small line field and default component builders."""

import numpy as np
import pytest

from oc2sim.config import TrialConfig
from oc2sim.controller import ControllerParams
from oc2sim.field import generate_line_field, goal_distance_map
from oc2sim.sensors import SensorGeometry


@pytest.fixture(scope="session")
def small_field():
    """200x200 arena, horizontal goal line through the middle."""
    return generate_line_field(200.0, 200.0, ((50.0, 100.0), (150.0, 100.0)),
                               goal_halfwidth=20.0, falloff=80.0, cell_size=4.0)


@pytest.fixture(scope="session")
def small_dmap(small_field):
    return goal_distance_map(small_field)


@pytest.fixture
def geometry():
    return SensorGeometry.for_robot_radius(35.0)


@pytest.fixture
def params():
    return ControllerParams()


@pytest.fixture
def tiny_config():
    """A trial cheap enough to run many times in unit tests."""
    return TrialConfig(n_robots=2, n_pucks=6, max_steps=200, seed=99)


def make_grid(rs: np.random.RandomState, h: int, w: int) -> np.ndarray:
    """Random field values in [0, 1] with a few exact zeros sprinkled in."""
    vals = rs.rand(h, w)
    n_zero = rs.randint(1, max(2, h * w // 10))
    ys = rs.randint(0, h, size=n_zero)
    xs = rs.randint(0, w, size=n_zero)
    vals[ys, xs] = 0.0
    return vals
