"""Arena state and circle physics.

The world is a rectangular arena with two body kinds, both circles: robots
(pose: position + heading) and passive pucks (position only).  State is held
in structure-of-arrays form so the hot loops run over contiguous float64
arrays; dataclass views are offered for convenience.

A step applies, in order: unicycle integration of every robot, iterative
positional overlap resolution, and a wall clamp that keeps every centre
within ``[radius, extent - radius]`` on both axes.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ParameterError, PlacementError
from .rng import Rng

DEFAULT_MARGIN = 70.0
DEFAULT_PLACE_ATTEMPTS = 10_000
MIN_SWEEPS = 3
MAX_SWEEPS = 64
OVERLAP_TOL = 1e-9

_SNAPSHOT_MAGIC = "oc2sim-world 1"


@dataclass(frozen=True)
class RobotBody:
    x: float
    y: float
    theta: float
    radius: float
    id: int = 0


@dataclass(frozen=True)
class PuckBody:
    x: float
    y: float
    radius: float
    id: int = 0


@dataclass(frozen=True)
class Action:
    """One control output: forward speed and angular speed (CCW positive)."""

    v: float
    omega: float


class World:
    """Mutable arena state; see module docstring for step semantics."""

    def __init__(self, arena_width, arena_height,
                 robot_xy, robot_theta, robot_radius,
                 puck_xy, puck_radius, step_count=0):
        if not (arena_width > 0.0 and arena_height > 0.0):
            raise ParameterError("arena extents must be positive")
        self.arena_width = float(arena_width)
        self.arena_height = float(arena_height)
        self.robot_xy = np.ascontiguousarray(robot_xy, dtype=np.float64).reshape(-1, 2)
        self.robot_theta = np.ascontiguousarray(robot_theta, dtype=np.float64).reshape(-1)
        self.robot_radius = np.ascontiguousarray(robot_radius, dtype=np.float64).reshape(-1)
        self.puck_xy = np.ascontiguousarray(puck_xy, dtype=np.float64).reshape(-1, 2)
        self.puck_radius = np.ascontiguousarray(puck_radius, dtype=np.float64).reshape(-1)
        if not (self.robot_xy.shape[0] == self.robot_theta.shape[0] == self.robot_radius.shape[0]):
            raise ParameterError("robot arrays disagree on robot count")
        if self.puck_xy.shape[0] != self.puck_radius.shape[0]:
            raise ParameterError("puck arrays disagree on puck count")
        if (self.robot_radius <= 0.0).any() or (self.puck_radius <= 0.0).any():
            raise ParameterError("body radii must be positive")
        self.step_count = int(step_count)

    # -- construction -----------------------------------------------------

    @classmethod
    def build(cls, arena_width, arena_height, robots=(), pucks=(), step_count=0):
        """World from RobotBody / PuckBody sequences (or plain tuples
        (x, y, theta, radius) and (x, y, radius))."""
        rrows = [(r.x, r.y, r.theta, r.radius) if isinstance(r, RobotBody) else tuple(r)
                 for r in robots]
        prows = [(p.x, p.y, p.radius) if isinstance(p, PuckBody) else tuple(p)
                 for p in pucks]
        r = np.array(rrows, dtype=np.float64).reshape(len(rrows), 4)
        p = np.array(prows, dtype=np.float64).reshape(len(prows), 3)
        return cls(arena_width, arena_height,
                   r[:, 0:2], r[:, 2], r[:, 3], p[:, 0:2], p[:, 2], step_count)

    def copy(self) -> "World":
        return World(self.arena_width, self.arena_height,
                     self.robot_xy.copy(), self.robot_theta.copy(),
                     self.robot_radius.copy(),
                     self.puck_xy.copy(), self.puck_radius.copy(),
                     self.step_count)

    # -- views ------------------------------------------------------------

    @property
    def n_robots(self) -> int:
        return self.robot_xy.shape[0]

    @property
    def n_pucks(self) -> int:
        return self.puck_xy.shape[0]

    def robots(self):
        """RobotBody views in array order; a body's id is its array index."""
        return [RobotBody(float(self.robot_xy[i, 0]), float(self.robot_xy[i, 1]),
                          float(self.robot_theta[i]), float(self.robot_radius[i]), i)
                for i in range(self.n_robots)]

    def pucks(self):
        return [PuckBody(float(self.puck_xy[i, 0]), float(self.puck_xy[i, 1]),
                         float(self.puck_radius[i]), i)
                for i in range(self.n_pucks)]

    def robot(self, i: int) -> RobotBody:
        return RobotBody(float(self.robot_xy[i, 0]), float(self.robot_xy[i, 1]),
                         float(self.robot_theta[i]), float(self.robot_radius[i]), i)

    def puck(self, i: int) -> PuckBody:
        return PuckBody(float(self.puck_xy[i, 0]), float(self.puck_xy[i, 1]),
                        float(self.puck_radius[i]), i)

    # -- dynamics ---------------------------------------------------------

    def step(self, actions, dt=1.0) -> None:
        """Advance one tick: integrate all robots under ``actions`` (one per
        robot, in robot order), resolve overlaps, clamp to walls."""
        if len(actions) != self.n_robots:
            raise ParameterError(
                f"need {self.n_robots} actions, got {len(actions)}"
            )
        arr = np.empty((self.n_robots, 2), dtype=np.float64)
        for i, a in enumerate(actions):
            if isinstance(a, Action):
                arr[i, 0] = a.v
                arr[i, 1] = a.omega
            else:
                arr[i, 0], arr[i, 1] = a
        kernels.step_arrays(self.robot_xy, self.robot_theta, self.robot_radius,
                            self.puck_xy, self.puck_radius, arr,
                            self.arena_width, self.arena_height, float(dt),
                            MIN_SWEEPS, MAX_SWEEPS, OVERLAP_TOL)
        self.step_count += 1

    def resolve_collisions(self, min_sweeps=MIN_SWEEPS, max_sweeps=MAX_SWEEPS,
                           tol=OVERLAP_TOL) -> int:
        """Run the positional overlap resolver in place; returns sweeps used.

        Every overlapping pair - robot-robot, robot-puck, puck-puck - splits
        the correction evenly along the centre line; a body that cannot take
        its share because a wall blocks it hands the remainder to the other,
        so pushing into a wall-pinned body deflects the pusher rather than
        sinking displacement.  At least ``min_sweeps`` passes run, continuing
        while any overlap exceeds ``tol`` up to ``max_sweeps``.
        """
        return int(kernels.resolve_collisions_arrays(
            self.robot_xy, self.robot_radius, self.puck_xy, self.puck_radius,
            self.arena_width, self.arena_height,
            int(min_sweeps), int(max_sweeps), float(tol)))

    def max_overlap(self):
        """Max overlap depth per pair kind: (robot-robot, robot-puck, puck-puck)."""
        a, b, c = kernels.max_overlaps(self.robot_xy, self.robot_radius,
                                       self.puck_xy, self.puck_radius)
        return float(a), float(b), float(c)

    # -- serialization ----------------------------------------------------

    def to_text(self) -> str:
        """Exact text snapshot.

        Three header lines (magic, ``arena W H``, ``step N``) then one body
        per line: ``kind id x y heading radius`` (puck heading written as
        0.0).  Floats use repr, so parsing the text reproduces every
        coordinate bit-for-bit.
        """
        lines = [_SNAPSHOT_MAGIC,
                 f"arena {self.arena_width!r} {self.arena_height!r}",
                 f"step {self.step_count}"]
        for i in range(self.n_robots):
            lines.append(f"robot {i} {float(self.robot_xy[i, 0])!r} "
                         f"{float(self.robot_xy[i, 1])!r} "
                         f"{float(self.robot_theta[i])!r} "
                         f"{float(self.robot_radius[i])!r}")
        for i in range(self.n_pucks):
            lines.append(f"puck {i} {float(self.puck_xy[i, 0])!r} "
                         f"{float(self.puck_xy[i, 1])!r} 0.0 "
                         f"{float(self.puck_radius[i])!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "World":
        try:
            lines = [ln for ln in text.splitlines() if ln.strip()]
            if lines[0].strip() != _SNAPSHOT_MAGIC:
                raise ValueError(f"bad magic line {lines[0]!r}")
            _, aw, ah = lines[1].split()
            _, stepn = lines[2].split()
            robots = []
            pucks = []
            for ln in lines[3:]:
                kind, _bid, x, y, th, rad = ln.split()
                if kind == "robot":
                    robots.append((float(x), float(y), float(th), float(rad)))
                elif kind == "puck":
                    pucks.append((float(x), float(y), float(rad)))
                else:
                    raise ValueError(f"unknown body kind {kind!r}")
        except (IndexError, ValueError) as exc:
            raise ParameterError(f"malformed world snapshot: {exc}") from exc
        return cls.build(float(aw), float(ah), robots, pucks, step_count=int(stepn))


def integrate_unicycle(robot: RobotBody, action, dt=1.0) -> RobotBody:
    """Pure unicycle update: the heading turns first (wrapped to [-pi, pi)),
    then the body translates ``v * dt`` along the new heading."""
    v, w = (action.v, action.omega) if isinstance(action, Action) else action
    nx, ny, nth = kernels.integrate_unicycle_pose(
        float(robot.x), float(robot.y), float(robot.theta),
        float(v), float(w), float(dt))
    return RobotBody(float(nx), float(ny), float(nth), robot.radius, robot.id)


def step(world: World, actions, dt=1.0) -> World:
    """Module-level form of :meth:`World.step`; mutates and returns ``world``."""
    world.step(actions, dt)
    return world


def resolve_collisions(world: World, min_sweeps=MIN_SWEEPS, max_sweeps=MAX_SWEEPS,
                       tol=OVERLAP_TOL) -> World:
    """Module-level form of :meth:`World.resolve_collisions`; mutates and
    returns ``world``."""
    world.resolve_collisions(min_sweeps, max_sweeps, tol)
    return world


def spawn_random(arena_width, arena_height, n_robots, n_pucks,
                 robot_radius, puck_radius, rng: Rng,
                 margin=DEFAULT_MARGIN, max_attempts=DEFAULT_PLACE_ATTEMPTS) -> World:
    """Rejection-sample an overlap-free world.

    Robots place first, then pucks; each body draws x, then y, uniformly from
    ``[radius + margin, extent - radius - margin]`` and is rejected while it
    overlaps anything already placed.  Robots additionally draw a heading
    uniform in [-pi, pi).  Raises :class:`PlacementError` after
    ``max_attempts`` rejections for any single body.
    """
    if n_robots < 0 or n_pucks < 0:
        raise ParameterError("body counts must be non-negative")
    robot_xy = np.zeros((n_robots, 2), dtype=np.float64)
    robot_theta = np.zeros(n_robots, dtype=np.float64)
    rrad = np.full(n_robots, float(robot_radius), dtype=np.float64)
    puck_xy = np.zeros((n_pucks, 2), dtype=np.float64)
    prad = np.full(n_pucks, float(puck_radius), dtype=np.float64)
    bad = kernels.spawn_bodies(rng.state, robot_xy, robot_theta, rrad,
                               puck_xy, prad,
                               float(arena_width), float(arena_height),
                               float(margin), int(max_attempts))
    if bad != 0:
        raise PlacementError(
            f"could not place {n_robots} robots and {n_pucks} pucks in "
            f"{arena_width}x{arena_height} (margin {margin}) "
            f"within {max_attempts} attempts per body")
    return World(arena_width, arena_height, robot_xy, robot_theta, rrad,
                 puck_xy, prad)


def scatter_pucks(world: World, rng: Rng, margin=DEFAULT_MARGIN,
                  max_attempts=DEFAULT_PLACE_ATTEMPTS) -> None:
    """Re-place every puck uniformly at random (robots stay put), overlap-free
    against robots and already re-placed pucks.  Mutates the world."""
    bad = kernels.scatter_pucks(rng.state, world.puck_xy, world.puck_radius,
                                world.robot_xy, world.robot_radius,
                                world.arena_width, world.arena_height,
                                float(margin), int(max_attempts))
    if bad != 0:
        raise PlacementError("could not re-place pucks within attempt budget")
