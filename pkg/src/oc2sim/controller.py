"""Reactive orbit controller.

Each step the controller reads three scalar-field values (L, C, R) plus three
boolean detections (puck on the left, robot on the left, robot on the right)
and emits a forward/angular speed pair.  The relative order of L, C, R is
encoded as a power of two and tested against two bitmask parameters: one
selects the orderings in which a seen puck pulls the robot left (inward),
the other the orderings in which it re-aligns left with the field contour.
A falling guard chain then picks the action:

1. recovery (reverse with a held random turn) while the recovery timer runs,
   started whenever all three field readings have been flat for a window,
   the body has stayed inside a small box for a window (a chase pinned
   against an immovable obstacle), or ``kick_interval`` steps passed since
   the last recovery (a sparse scheduled kick that re-phases transport-free
   limit cycles);
2. veer left away from the goal region when the right tap reads black;
3. veer left to gather a puck (mask hit, puck seen, left clear of robots);
4. veer left to align with the contour (mask hit, left clear of robots);
5. veer right - the default orbit - when the right is clear of robots;
6. otherwise creep forward at quarter speed.

Branch ids in this order: 0 recovery, 1 goal-avoid, 2 gather, 3 align,
4 orbit, 5 creep.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ParameterError
from .rng import Rng
from .sensors import SensorSnapshot
from .world import Action

BRANCH_NAMES = ("recovery", "goal-avoid", "gather", "align", "orbit", "creep")

DEFAULT_PUCK_VARIANT = 13
DEFAULT_ALIGN_VARIANT = 18


@dataclass(frozen=True)
class ControllerParams:
    """Tuning for :func:`decide`; defaults are the best-performing variants."""

    vmax: float = 2.0
    wmax: float = 0.3
    puck_variant: int = DEFAULT_PUCK_VARIANT
    align_variant: int = DEFAULT_ALIGN_VARIANT
    black_threshold: float = 0.05
    stuck_window: int = 60
    stuck_epsilon: float = 0.03
    stuck_move_epsilon: float = 20.0
    recovery_duration: int = 30
    kick_interval: int = 6000

    def __post_init__(self):
        if not (self.vmax > 0.0):
            raise ParameterError(f"vmax must be positive, got {self.vmax}")
        if not (self.wmax > 0.0):
            raise ParameterError(f"wmax must be positive, got {self.wmax}")
        for name in ("puck_variant", "align_variant"):
            m = getattr(self, name)
            if not (isinstance(m, (int, np.integer)) and 0 <= m <= 63):
                raise ParameterError(f"{name} must be an integer in [0, 63], got {m}")
        if not (0.0 <= self.black_threshold <= 1.0):
            raise ParameterError("black_threshold must lie in [0, 1]")
        if int(self.stuck_window) < 1:
            raise ParameterError("stuck_window must be at least 1")
        if not (self.stuck_epsilon > 0.0):
            raise ParameterError("stuck_epsilon must be positive")
        if not (self.stuck_move_epsilon > 0.0):
            raise ParameterError("stuck_move_epsilon must be positive")
        if int(self.recovery_duration) < 0:
            raise ParameterError("recovery_duration must be non-negative")
        if int(self.kick_interval) < 0:
            raise ParameterError("kick_interval must be non-negative")
        object.__setattr__(self, "puck_variant", int(self.puck_variant))
        object.__setattr__(self, "align_variant", int(self.align_variant))
        object.__setattr__(self, "stuck_window", int(self.stuck_window))
        object.__setattr__(self, "recovery_duration", int(self.recovery_duration))
        object.__setattr__(self, "kick_interval", int(self.kick_interval))


class ControllerState:
    """Per-robot mutable controller memory.

    Holds the ring buffers of recent (L, C, R) readings and (x, y) poses
    used by stuck detection (both share one cursor) and the recovery timer
    with its held action.  Arrays carry a leading robot axis of length 1 so
    they feed the kernels directly.
    """

    def __init__(self, params: ControllerParams):
        w = params.stuck_window
        self.hist = np.zeros((1, w, 3), dtype=np.float64)
        self.hist_count = np.zeros(1, dtype=np.int64)
        self.hist_pos = np.zeros(1, dtype=np.int64)
        self.pose_hist = np.zeros((1, w, 2), dtype=np.float64)
        self.kick_count = np.zeros(1, dtype=np.int64)
        self.rec_remaining = np.zeros(1, dtype=np.int64)
        self.rec_v = np.zeros(1, dtype=np.float64)
        self.rec_omega = np.zeros(1, dtype=np.float64)

    @property
    def recovering(self) -> bool:
        return int(self.rec_remaining[0]) > 0

    def history(self) -> np.ndarray:
        """Readings in arrival order, oldest first, shape (n, 3) with n the
        number of readings seen (capped at the window)."""
        n = int(self.hist_count[0])
        w = self.hist.shape[1]
        if n < w:
            return self.hist[0, :n].copy()
        p = int(self.hist_pos[0])
        return np.concatenate([self.hist[0, p:], self.hist[0, :p]], axis=0)

    def copy(self) -> "ControllerState":
        out = ControllerState.__new__(ControllerState)
        out.hist = self.hist.copy()
        out.hist_count = self.hist_count.copy()
        out.hist_pos = self.hist_pos.copy()
        out.pose_hist = self.pose_hist.copy()
        out.kick_count = self.kick_count.copy()
        out.rec_remaining = self.rec_remaining.copy()
        out.rec_v = self.rec_v.copy()
        out.rec_omega = self.rec_omega.copy()
        return out


def compute_order(left: float, centre: float, right: float) -> int:
    """Power-of-two code for the relative order of the three readings.

    Chained guards, first match wins (ties fall to the earlier code):
    R>=C>=L -> 1, C>=R>=L -> 2, R>=L>=C -> 4, L>=R>=C -> 8, C>=L>=R -> 16,
    otherwise (L>=C>=R) -> 32.
    """
    return int(kernels.compute_order(float(left), float(centre), float(right)))


def is_stuck(history: np.ndarray, window: int, epsilon: float) -> bool:
    """True when ``history`` holds a full window and every channel's spread
    (max - min) over it is strictly below ``epsilon``."""
    h = np.asarray(history, dtype=np.float64).reshape(-1, 3)
    if h.shape[0] != window:
        return False
    spread = h.max(axis=0) - h.min(axis=0)
    return bool((spread < epsilon).all())


def decide(snapshot: SensorSnapshot, params: ControllerParams,
           state: ControllerState, rng: Rng):
    """One control decision; mutates ``state`` and returns (Action, branch_id).

    The snapshot's readings are pushed into the stuck-detection window and
    its pose into the pinned-body extents first; if either test fires (flat
    or all-black readings over a full window; body inside a
    ``stuck_move_epsilon`` box over a full window) and no recovery is
    already running, a recovery starts: reverse at full speed with a turn
    rate drawn uniformly from [-wmax, wmax] and held for
    ``recovery_duration`` steps.  Otherwise the guard chain in the module
    docstring picks the action.  The pinned-body test assumes the
    snapshot's pose tracks the robot; synthetic snapshots that leave it at
    the default zeros should use a fresh state per call.
    """
    v, omega, branch = kernels.decide_one(
        float(snapshot.left), float(snapshot.centre), float(snapshot.right),
        bool(snapshot.left_puck), bool(snapshot.left_robot),
        bool(snapshot.right_robot),
        float(snapshot.x), float(snapshot.y),
        params.vmax, params.wmax, params.puck_variant, params.align_variant,
        params.black_threshold, params.stuck_window, params.stuck_epsilon,
        params.stuck_move_epsilon, params.recovery_duration,
        params.kick_interval,
        0, state.hist, state.hist_count, state.hist_pos, state.pose_hist,
        state.kick_count,
        state.rec_remaining, state.rec_v, state.rec_omega, rng.state)
    return Action(float(v), float(omega)), int(branch)
