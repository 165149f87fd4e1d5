"""oc2sim: deterministic 2-D swarm simulator for orbit-based shape formation.

Differential-drive robots orbit a scalar guidance field and herd passive
pucks into the field's zero-valued goal region.  Hot loops are compiled with
numba when available; set ``OC2_DISABLE_NUMBA=1`` to run the same source
interpreted (results are bit-identical either way).
"""

from ._jit import NUMBA_ENABLED
from .controller import (BRANCH_NAMES, ControllerParams, ControllerState,
                         compute_order, decide, is_stuck)
from .errors import ConfigError, FieldFormatError, ParameterError, PlacementError
from .field import (GoalDistanceMap, ScalarField, field_from_array,
                    generate_l_field, generate_line_field, goal_distance_map,
                    load_field, sample, write_field)
from .rng import Rng, mix64, trial_seed
from .sensors import (SensorGeometry, SensorQueueState, SensorSnapshot,
                      classify_block_side, detect_pucks_left, detect_robots,
                      read_field_queued, read_field_triangle, sense)
from .world import (Action, PuckBody, RobotBody, World, integrate_unicycle,
                    scatter_pucks, spawn_random)

__version__ = "1.0.0"

__all__ = [
    "NUMBA_ENABLED", "__version__",
    "ConfigError", "FieldFormatError", "ParameterError", "PlacementError",
    "ScalarField", "GoalDistanceMap", "field_from_array", "generate_line_field",
    "generate_l_field", "goal_distance_map", "load_field", "sample", "write_field",
    "Action", "PuckBody", "RobotBody", "World", "integrate_unicycle",
    "scatter_pucks", "spawn_random",
    "SensorGeometry", "SensorQueueState", "SensorSnapshot", "classify_block_side",
    "detect_pucks_left", "detect_robots", "read_field_queued",
    "read_field_triangle", "sense",
    "BRANCH_NAMES", "ControllerParams", "ControllerState", "compute_order",
    "decide", "is_stuck",
    "Rng", "mix64", "trial_seed",
]
