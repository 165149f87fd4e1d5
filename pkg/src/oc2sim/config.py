"""Trial configuration: defaults, JSON parsing, and builders.

A configuration is a flat frozen dataclass covering the arena, field shape,
sensors, controller, and schedule.  On disk it is a JSON document with five
sections (``world``, ``field``, ``sensors``, ``controller``, ``schedule``)
plus a top-level ``seed``; every key is optional and unknown keys are
rejected with a diagnostic naming the full key path.  ``parse_config`` then
``save_config`` then ``parse_config`` reproduces the identical resolved
configuration.
"""

import dataclasses
import json
import math
from dataclasses import dataclass

from .controller import ControllerParams
from .errors import ConfigError
from .field import (ScalarField, generate_l_field, generate_line_field,
                    load_field)
from .sensors import SensorGeometry

Segment = tuple  # ((x0, y0), (x1, y1))


@dataclass(frozen=True)
class TrialConfig:
    """Fully resolved configuration for one trial (or a family of them)."""

    # world
    arena_width: float = 800.0
    arena_height: float = 800.0
    robot_radius: float = 35.0
    puck_radius: float = 14.0
    n_robots: int = 4
    n_pucks: int = 40
    margin: float = 70.0
    place_attempts: int = 10_000
    # field
    shape: str = "line"               # "line" | "l" | "file"
    file: str = ""                     # PGM path when shape == "file"
    cell_size: float = 4.0
    segment: Segment = ((200.0, 400.0), (600.0, 400.0))
    segment_b: Segment = ((200.0, 400.0), (200.0, 640.0))
    goal_halfwidth: float = 40.0
    falloff: float = 420.0
    interp: str = "bilinear"          # "bilinear" | "nearest"
    # sensors
    puck_fov: float = 210.0
    robot_fov: float = 150.0
    fov_halfangle: float = math.pi / 2.0
    puck_camera: str = "lens"         # "lens" | "halfplane"
    wall_deadband: float = 42.0
    queue_len: int = 10
    sensing: str = "ideal"            # "ideal" | "queued"
    # controller
    vmax: float = 2.0
    wmax: float = 0.3
    puck_variant: int = 13
    align_variant: int = 18
    black_threshold: float = 0.05
    stuck_window: int = 60
    stuck_epsilon: float = 0.03
    stuck_move_epsilon: float = 20.0
    recovery_duration: int = 30
    kick_interval: int = 6000
    # schedule
    dt: float = 1.0
    max_steps: int = 50_000
    sample_interval: int = 10          # 0 = record only the final value
    # seed
    seed: int = 2026

    def __post_init__(self):
        def bad(key, msg):
            raise ConfigError(f"{key}: {msg}")

        for key in ("arena_width", "arena_height", "robot_radius", "puck_radius",
                    "cell_size", "goal_halfwidth", "falloff", "puck_fov",
                    "robot_fov", "vmax", "wmax", "stuck_epsilon",
                    "stuck_move_epsilon", "dt"):
            if not (getattr(self, key) > 0):
                bad(key, f"must be positive, got {getattr(self, key)}")
        for key in ("n_robots", "n_pucks"):
            if getattr(self, key) < 0:
                bad(key, f"must be non-negative, got {getattr(self, key)}")
        if self.margin < 0:
            bad("margin", f"must be non-negative, got {self.margin}")
        if self.place_attempts < 1:
            bad("place_attempts", f"must be at least 1, got {self.place_attempts}")
        if self.shape not in ("line", "l", "file"):
            bad("shape", f"must be one of 'line', 'l', 'file', got {self.shape!r}")
        if self.shape == "file" and not self.file:
            bad("file", "required when shape is 'file'")
        for key in ("segment", "segment_b"):
            seg = getattr(self, key)
            try:
                (ax, ay), (bx, by) = seg
                seg = ((float(ax), float(ay)), (float(bx), float(by)))
            except (TypeError, ValueError):
                bad(key, f"must be a pair of (x, y) points, got {seg!r}")
            object.__setattr__(self, key, seg)
        if self.interp not in ("bilinear", "nearest"):
            bad("interp", f"must be 'bilinear' or 'nearest', got {self.interp!r}")
        if self.robot_fov > self.puck_fov:
            bad("robot_fov", f"must not exceed puck_fov "
                             f"({self.robot_fov} > {self.puck_fov})")
        if not (0.0 < self.fov_halfangle <= math.pi):
            bad("fov_halfangle", f"must lie in (0, pi], got {self.fov_halfangle}")
        if self.queue_len < 1:
            bad("queue_len", f"must be at least 1, got {self.queue_len}")
        if self.puck_camera not in ("lens", "halfplane"):
            bad("puck_camera",
                f"must be 'lens' or 'halfplane', got {self.puck_camera!r}")
        if not (self.wall_deadband >= 0.0):
            bad("wall_deadband",
                f"must be non-negative, got {self.wall_deadband}")
        if self.sensing not in ("ideal", "queued"):
            bad("sensing", f"must be 'ideal' or 'queued', got {self.sensing!r}")
        for key in ("puck_variant", "align_variant"):
            v = getattr(self, key)
            if not (0 <= v <= 63):
                bad(key, f"must be an integer in [0, 63], got {v}")
        if not (0.0 <= self.black_threshold <= 1.0):
            bad("black_threshold", f"must lie in [0, 1], got {self.black_threshold}")
        if self.stuck_window < 1:
            bad("stuck_window", f"must be at least 1, got {self.stuck_window}")
        if self.recovery_duration < 0:
            bad("recovery_duration", f"must be non-negative, got {self.recovery_duration}")
        if self.kick_interval < 0:
            bad("kick_interval", f"must be non-negative, got {self.kick_interval}")
        if self.max_steps < 1:
            bad("max_steps", f"must be at least 1, got {self.max_steps}")
        if self.sample_interval < 0:
            bad("sample_interval", f"must be non-negative, got {self.sample_interval}")
        if not (0 <= self.seed < 2 ** 64):
            bad("seed", f"must be an unsigned 64-bit integer, got {self.seed}")


# JSON layout: section -> (field, coercion kind)
_SECTIONS = {
    "world": ("arena_width", "arena_height", "robot_radius", "puck_radius",
              "n_robots", "n_pucks", "margin", "place_attempts"),
    "field": ("shape", "file", "cell_size", "segment", "segment_b",
              "goal_halfwidth", "falloff", "interp"),
    "sensors": ("puck_fov", "robot_fov", "fov_halfangle", "puck_camera",
                "wall_deadband", "queue_len", "sensing"),
    "controller": ("vmax", "wmax", "puck_variant", "align_variant",
                   "black_threshold", "stuck_window", "stuck_epsilon",
                   "stuck_move_epsilon", "recovery_duration",
                   "kick_interval"),
    "schedule": ("dt", "max_steps", "sample_interval"),
}

_INT_FIELDS = {"n_robots", "n_pucks", "place_attempts", "queue_len",
               "puck_variant", "align_variant", "stuck_window",
               "recovery_duration", "kick_interval", "max_steps",
               "sample_interval", "seed"}
_STR_FIELDS = {"shape", "file", "interp", "sensing", "puck_camera"}
_SEG_FIELDS = {"segment", "segment_b"}


def _coerce(path: str, name: str, value):
    if name in _SEG_FIELDS:
        try:
            (ax, ay), (bx, by) = value
            return ((float(ax), float(ay)), (float(bx), float(by)))
        except (TypeError, ValueError):
            raise ConfigError(
                f"{path}: expected [[x0, y0], [x1, y1]], got {value!r}") from None
    if name in _STR_FIELDS:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if name in _INT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    return float(value)


def config_from_dict(doc: dict, base: TrialConfig = None) -> TrialConfig:
    """Resolved config from a (possibly partial) nested dict over ``base``
    (the documented defaults when omitted).  Unknown sections or keys raise
    :class:`ConfigError` naming the offending key path."""
    if base is None:
        base = TrialConfig()
    if not isinstance(doc, dict):
        raise ConfigError(f"configuration root must be an object, got {doc!r}")
    updates = {}
    for section, payload in doc.items():
        if section == "seed":
            updates["seed"] = _coerce("seed", "seed", payload)
            continue
        if section not in _SECTIONS:
            raise ConfigError(f"unknown configuration key '{section}'")
        if not isinstance(payload, dict):
            raise ConfigError(f"{section}: expected an object of settings")
        for name, value in payload.items():
            path = f"{section}.{name}"
            if name not in _SECTIONS[section]:
                raise ConfigError(f"unknown configuration key '{path}'")
            updates[name] = _coerce(path, name, value)
    return dataclasses.replace(base, **updates)


def config_to_dict(cfg: TrialConfig) -> dict:
    """Nested JSON-ready dict; inverse of :func:`config_from_dict`."""
    out = {"seed": cfg.seed}
    for section, names in _SECTIONS.items():
        body = {}
        for name in names:
            v = getattr(cfg, name)
            if name in _SEG_FIELDS:
                v = [[v[0][0], v[0][1]], [v[1][0], v[1][1]]]
            body[name] = v
        out[section] = body
    return out


def parse_config(path) -> TrialConfig:
    """Load and resolve a JSON config file; empty document means defaults."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return config_from_dict(doc)


def save_config(cfg: TrialConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")


def build_field(cfg: TrialConfig) -> ScalarField:
    """The scalar field a config describes (generated or loaded)."""
    if cfg.shape == "line":
        return generate_line_field(cfg.arena_width, cfg.arena_height,
                                   cfg.segment, cfg.goal_halfwidth,
                                   cfg.falloff, cfg.cell_size)
    if cfg.shape == "l":
        return generate_l_field(cfg.arena_width, cfg.arena_height,
                                cfg.segment, cfg.segment_b,
                                cfg.goal_halfwidth, cfg.falloff, cfg.cell_size)
    fld = load_field(cfg.file, cfg.cell_size)
    if (fld.arena_width, fld.arena_height) != (cfg.arena_width, cfg.arena_height):
        raise ConfigError(
            f"file: field {cfg.file} covers {fld.arena_width}x{fld.arena_height} "
            f"but the arena is {cfg.arena_width}x{cfg.arena_height}")
    return fld


def sensor_geometry(cfg: TrialConfig) -> SensorGeometry:
    return SensorGeometry.for_robot_radius(
        cfg.robot_radius,
        puck_fov_radius=cfg.puck_fov,
        robot_fov_radius=cfg.robot_fov,
        fov_halfangle=cfg.fov_halfangle,
        puck_camera=cfg.puck_camera,
        wall_deadband=cfg.wall_deadband,
        queue_len=cfg.queue_len,
        interp=cfg.interp)


def controller_params(cfg: TrialConfig) -> ControllerParams:
    return ControllerParams(
        vmax=cfg.vmax, wmax=cfg.wmax,
        puck_variant=cfg.puck_variant, align_variant=cfg.align_variant,
        black_threshold=cfg.black_threshold,
        stuck_window=cfg.stuck_window, stuck_epsilon=cfg.stuck_epsilon,
        stuck_move_epsilon=cfg.stuck_move_epsilon,
        recovery_duration=cfg.recovery_duration,
        kick_interval=cfg.kick_interval)
