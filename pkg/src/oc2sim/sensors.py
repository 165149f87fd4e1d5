"""Robot sensing.

Three field taps (labelled L, C, R — the slots the controller's ordering
logic reads), a left-side puck camera, and peer-robot detection on both
sides.  Offsets are in the body frame: +x forward, +y to the left.

The default tap layout puts C behind the axle and L/R on the lateral axis
(L at -0.6 r, R at +0.6 r).  This arrangement makes the no-puck flow spiral
*inward* onto the goal structure and settle into a clockwise orbit along its
rim: the C-behind tap flips the veer-left attractor cone of the alignment
branch to face the structure, and the rim orbit then emerges as a bang-bang
cycle between the goal-zone-avoidance branch and the default veer-right.  A
forward-C triangle points that attractor cone *away* from the structure, so
a lone robot spirals out and parks in an arena corner instead of orbiting —
no amount of downstream tuning recovers from that.  The tap labels name
controller inputs, not body sides.

Puck detection defaults to an offset-lens camera: a circle of diameter
``puck_fov_radius`` tangent to the robot's centre, tilted 45 degrees to the
left of the heading.  The lens sees the nose region at contact range but
neither the far field nor anything behind; see ``detect_pucks_left`` for why
the idealized half-plane camera (also available) degenerates with dense
pucks.

``read_field_queued`` emulates a hardware stack where the lateral taps sit on
one row and reach the controller through a fixed-length FIFO, delaying L and
R by ``queue_len`` control steps while C stays current.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import ParameterError
from .field import ScalarField
from .world import RobotBody, World

DEFAULT_PUCK_FOV = 210.0
DEFAULT_ROBOT_FOV = 150.0
DEFAULT_FOV_HALFANGLE = np.pi / 2.0
DEFAULT_QUEUE_LEN = 10
DEFAULT_PUCK_CAMERA = "lens"
DEFAULT_WALL_DEADBAND = 42.0


class SensorSnapshot(NamedTuple):
    """Everything the controller sees in one step.

    ``x``/``y`` carry the pose the detections were taken from; the
    controller's pinned-body stuck test watches them.  They default to zero
    so synthetic snapshots can be built from readings alone.
    """

    left: float
    centre: float
    right: float
    left_puck: bool
    left_robot: bool
    right_robot: bool
    x: float = 0.0
    y: float = 0.0


def _triangle_offsets(robot_radius: float) -> np.ndarray:
    r = float(robot_radius)
    return np.array([[0.0, -0.6 * r],   # L tap
                     [-0.5 * r, 0.0],   # C tap
                     [0.0, 0.6 * r]],   # R tap
                    dtype=np.float64)


@dataclass(frozen=True)
class SensorGeometry:
    """Sensor layout, ranges, and camera model.

    ``offsets`` is a (3, 2) body-frame array ordered L, C, R.
    ``puck_camera`` picks the puck-detection model: ``"lens"`` (offset
    circle, the default) or ``"halfplane"`` (idealized left half-plane within
    ``fov_halfangle``).  ``wall_deadband`` blinds the puck camera to pucks
    whose centre sits within that distance of an arena wall; the default is
    just over a body radius, where a puck has no wall-side face left to push
    against (set 0 to disable).  ``interp`` picks the field sampling mode
    for every tap.
    """

    offsets: np.ndarray
    puck_fov_radius: float = DEFAULT_PUCK_FOV
    robot_fov_radius: float = DEFAULT_ROBOT_FOV
    fov_halfangle: float = DEFAULT_FOV_HALFANGLE
    puck_camera: str = DEFAULT_PUCK_CAMERA
    wall_deadband: float = DEFAULT_WALL_DEADBAND
    queue_len: int = DEFAULT_QUEUE_LEN
    interp: str = "bilinear"

    def __post_init__(self):
        off = np.ascontiguousarray(self.offsets, dtype=np.float64)
        if off.shape != (3, 2):
            raise ParameterError("offsets must be a (3, 2) array: L, C, R")
        off.setflags(write=False)
        object.__setattr__(self, "offsets", off)
        if not (self.puck_fov_radius > 0.0 and self.robot_fov_radius > 0.0):
            raise ParameterError("field-of-view radii must be positive")
        if self.robot_fov_radius > self.puck_fov_radius:
            raise ParameterError(
                f"robot_fov_radius {self.robot_fov_radius} exceeds "
                f"puck_fov_radius {self.puck_fov_radius}")
        if not (0.0 < self.fov_halfangle <= np.pi):
            raise ParameterError("fov_halfangle must lie in (0, pi]")
        if self.puck_camera not in ("lens", "halfplane"):
            raise ParameterError(
                f"unknown puck camera model {self.puck_camera!r}")
        if not (self.wall_deadband >= 0.0):
            raise ParameterError("wall_deadband must be non-negative")
        if int(self.queue_len) < 1:
            raise ParameterError("queue_len must be at least 1")
        object.__setattr__(self, "queue_len", int(self.queue_len))
        if self.interp not in ("bilinear", "nearest"):
            raise ParameterError(f"unknown interpolation mode {self.interp!r}")

    @classmethod
    def for_robot_radius(cls, robot_radius: float, **kw) -> "SensorGeometry":
        """Default tap triangle for a robot of the given radius: C at
        (-0.5 r, 0), L at (0, -0.6 r), R at (0, +0.6 r)."""
        if not (robot_radius > 0.0):
            raise ParameterError("robot_radius must be positive")
        return cls(offsets=_triangle_offsets(robot_radius), **kw)

    @property
    def _interp_flag(self) -> int:
        return 0 if self.interp == "bilinear" else 1

    @property
    def _camera_flag(self) -> int:
        return 1 if self.puck_camera == "lens" else 0

    def _offset_scalars(self):
        o = self.offsets
        return (float(o[0, 0]), float(o[0, 1]), float(o[1, 0]),
                float(o[1, 1]), float(o[2, 0]), float(o[2, 1]))


class SensorQueueState:
    """Per-robot FIFO state for :func:`read_field_queued`.

    Arrays are shaped (1, queue_len) so the same buffers feed the kernels
    directly; ``copy`` gives an independent state.
    """

    def __init__(self, queue_len: int):
        if queue_len < 1:
            raise ParameterError("queue_len must be at least 1")
        self.q_left = np.zeros((1, queue_len), dtype=np.float64)
        self.q_right = np.zeros((1, queue_len), dtype=np.float64)
        self.q_count = np.zeros(1, dtype=np.int64)
        self.q_pos = np.zeros(1, dtype=np.int64)

    @property
    def queue_len(self) -> int:
        return self.q_left.shape[1]

    @property
    def primed(self) -> bool:
        return int(self.q_count[0]) == self.queue_len

    def copy(self) -> "SensorQueueState":
        out = SensorQueueState(self.queue_len)
        out.q_left[:] = self.q_left
        out.q_right[:] = self.q_right
        out.q_count[:] = self.q_count
        out.q_pos[:] = self.q_pos
        return out


def read_field_triangle(robot: RobotBody, fld: ScalarField,
                        geometry: SensorGeometry):
    """(L, C, R) field values at the triangle taps, current step."""
    olx, oly, ocx, ocy, orx, ory = geometry._offset_scalars()
    l, c, r = kernels.sense_triangle(
        fld.values, fld.cell_size, robot.x, robot.y, robot.theta,
        olx, oly, ocx, ocy, orx, ory, geometry._interp_flag)
    return float(l), float(c), float(r)


def read_field_queued(robot: RobotBody, fld: ScalarField,
                      geometry: SensorGeometry, state: SensorQueueState):
    """(L, C, R) under the hardware-stack emulation; mutates ``state``.

    All samples sit on one row at the centre tap's forward offset: L/R keep
    their lateral offsets but pass through a FIFO of ``queue_len`` reads
    (current samples pass through until it is primed), and C is the mean of
    two inner samples at a quarter of the lateral offsets.
    """
    if state.queue_len != geometry.queue_len:
        raise ParameterError(
            f"queue state length {state.queue_len} does not match geometry "
            f"queue_len {geometry.queue_len}")
    olx, oly, ocx, ocy, orx, ory = geometry._offset_scalars()
    l, c, r = kernels.sense_queued(
        fld.values, fld.cell_size, robot.x, robot.y, robot.theta,
        olx, oly, ocx, ocy, orx, ory, geometry._interp_flag,
        state.q_left, state.q_right, state.q_count, state.q_pos, 0)
    return float(l), float(c), float(r)


def detect_pucks_left(robot: RobotBody, world: World,
                      geometry: SensorGeometry) -> bool:
    """True when some puck centre lies in the left-camera region.

    Under the default ``"lens"`` camera the region is a circle of diameter
    ``puck_fov_radius`` tangent to the robot centre, its centre tilted 45
    degrees left of the heading: it reaches ``puck_fov_radius`` ahead-left,
    covers the nose at contact range, and excludes everything behind.  Under
    ``"halfplane"`` the region is the idealized one: within
    ``puck_fov_radius``, strictly left of the heading axis, within
    ``fov_halfangle`` of the heading.  The half-plane model is exposed for
    analysis but degenerates in crowded arenas — with 40 pucks in view some
    puck is almost always "on the left", the gather branch then holds the
    turn rate at +wmax over most heading sectors, and the robot winds into a
    stationary pivot loop; the bounded lens keeps chases short and local.

    Either camera ignores pucks within ``wall_deadband`` of a wall: a puck
    pressed that close has no reachable wall-side face, so it can only be
    slid along the wall, and chasing it pins the chaser in a recover-return
    loop.
    """
    return bool(kernels.detect_pucks_left(
        robot.x, robot.y, robot.theta, world.puck_xy,
        geometry.puck_fov_radius, geometry.fov_halfangle,
        geometry._camera_flag,
        world.arena_width, world.arena_height, geometry.wall_deadband))


def detect_robots(robot_index: int, world: World,
                  geometry: SensorGeometry):
    """(left_robot, right_robot) for the robot at ``robot_index``.

    A peer counts when its centre is within ``robot_fov_radius`` and within
    ``fov_halfangle`` of the heading; a centre exactly on the heading axis
    sets both flags.  The robot never detects itself.
    """
    if not (0 <= robot_index < world.n_robots):
        raise ParameterError(f"robot_index {robot_index} out of range")
    l, r = kernels.detect_robots_sides(
        robot_index, world.robot_xy, world.robot_theta,
        geometry.robot_fov_radius, geometry.fov_halfangle)
    return bool(l), bool(r)


def sense(robot_index: int, world: World, fld: ScalarField,
          geometry: SensorGeometry, queue_state=None) -> SensorSnapshot:
    """Full sensor sweep for one robot against the current world."""
    robot = RobotBody(float(world.robot_xy[robot_index, 0]),
                      float(world.robot_xy[robot_index, 1]),
                      float(world.robot_theta[robot_index]),
                      float(world.robot_radius[robot_index]))
    if queue_state is None:
        l, c, r = read_field_triangle(robot, fld, geometry)
    else:
        l, c, r = read_field_queued(robot, fld, geometry, queue_state)
    lp = detect_pucks_left(robot, world, geometry)
    lr, rr = detect_robots(robot_index, world, geometry)
    return SensorSnapshot(l, c, r, lp, lr, rr, robot.x, robot.y)


def classify_block_side(block_x: float, block_width: float, lane_width: float) -> str:
    """Which output lane(s) a block of width ``block_width`` centred at
    ``block_x`` belongs to on a lane of width ``lane_width``.

    'left' when the block extends left of the midline (block_x - width/2 <
    lane_width/2), 'right' when it extends right of it, 'both' when it does
    both, i.e. the midline lies strictly inside the block.
    """
    if not (lane_width > 0.0):
        raise ParameterError("lane_width must be positive")
    if not (block_width > 0.0):
        raise ParameterError("block_width must be positive")
    if not (0.0 <= block_x <= lane_width):
        raise ParameterError("block centre must lie within the lane")
    mid = lane_width / 2.0
    left = block_x - block_width / 2.0 < mid
    right = block_x + block_width / 2.0 > mid
    if left and right:
        return "both"
    return "left" if left else "right"
