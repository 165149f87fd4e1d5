"""Trial orchestration, metrics, statistics, and the standard studies.

Studies: robot-count sweep, puck-sensing-radius ablation, perturbation
(mid-trial puck rescatter), exhaustive variant search, and flow-field
analysis.  Every study derives one seed per trial from a master seed through
:func:`oc2sim.rng.trial_seed`, so results never depend on execution order or
thread count; trials are embarrassingly parallel and aggregation is a
deterministic reduction in submission order.
"""

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import kernels
from .config import TrialConfig, build_field, controller_params, sensor_geometry
from .errors import ParameterError, PlacementError
from .field import GoalDistanceMap, ScalarField, goal_distance_map
from .rng import Rng, trial_seed
from .world import MAX_SWEEPS, MIN_SWEEPS, OVERLAP_TOL, World, spawn_random

DEFAULT_SWEEP_COUNTS = (1, 2, 4, 8, 16)
DEFAULT_SCATTER_STEP = 2500
DEFAULT_ABLATION_RADII = (420.0, 100.0, 80.0)
DEFAULT_SEARCH_STEPS = 2000
DEFAULT_SEARCH_TRIALS = 5
DEFAULT_REFINE_TOP = 50
DEFAULT_FLOW_STEPS = 40


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def proportion_in_goal(world: World, dmap: GoalDistanceMap) -> float:
    """Fraction of pucks touching the goal region: a puck counts when the
    goal distance at the cell containing its centre is <= its radius (closed
    inequality).  No pucks -> 0.0 by convention."""
    return float(kernels.proportion_in_goal_arrays(
        world.puck_xy, world.puck_radius, dmap.distances, dmap.cell_size))


def goal_coverage(world: World, fld: ScalarField) -> float:
    """Fraction of zero-valued field cells whose centre lies within a puck
    radius of at least one puck centre; measures how well the goal region is
    filled.  No pucks -> 0.0."""
    zys, zxs = fld.zero_cells()
    if zys.shape[0] == 0:
        raise ParameterError("field has no zero-valued cells; no goal region")
    return float(kernels.goal_coverage_arrays(
        zys, zxs, fld.cell_size, world.puck_xy, world.puck_radius))


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrialRecord:
    """One trial's outcome: sampled metric series plus the final state."""

    config: TrialConfig
    steps: np.ndarray        # (n,) int64, strictly increasing
    proportions: np.ndarray  # (n,) float64 in [0, 1]
    final_proportion: float
    wall_time: float
    final_world: World
    scatter_step: Optional[int] = None


@dataclass(frozen=True)
class SweepSummary:
    """Per-step mean and 95% CI half-width across one group's trials."""

    group: int
    steps: np.ndarray
    mean: np.ndarray
    ci_half: np.ndarray
    n_trials: int


@dataclass(frozen=True)
class VariantScore:
    puck_variant: int
    align_variant: int
    mean_final: float
    trials: int


@dataclass(frozen=True)
class AblationResult:
    radius: float
    mean_final_proportion: float
    mean_goal_coverage: float
    records: tuple


@dataclass(frozen=True)
class SearchResult:
    """Variant-search outcome: the full ranking at reduced budget plus the
    full-budget re-evaluation of the leading combos."""

    scores: tuple           # all 4096 VariantScores, best first
    refined: tuple          # top combos re-run at full budget, best first
    trials_per_combo: int
    search_steps: int
    refine_steps: int

    def rank_of(self, puck_variant: int, align_variant: int) -> int:
        """1-based position of a combo in the reduced-budget ranking."""
        for i, s in enumerate(self.scores):
            if s.puck_variant == puck_variant and s.align_variant == align_variant:
                return i + 1
        raise ParameterError(f"combo ({puck_variant}, {align_variant}) not in ranking")


@dataclass(frozen=True)
class FlowVector:
    x: float
    y: float
    dx: float
    dy: float


# ---------------------------------------------------------------------------
# field cache (immutable bundles shared across threads)
# ---------------------------------------------------------------------------

_FIELD_LOCK = threading.Lock()
_FIELD_CACHE = {}


def _field_key(cfg: TrialConfig):
    return (cfg.shape, cfg.file, cfg.cell_size, cfg.segment, cfg.segment_b,
            cfg.goal_halfwidth, cfg.falloff, cfg.arena_width, cfg.arena_height)


def _field_bundle(cfg: TrialConfig):
    key = _field_key(cfg)
    with _FIELD_LOCK:
        hit = _FIELD_CACHE.get(key)
    if hit is not None:
        return hit
    fld = build_field(cfg)
    dmap = goal_distance_map(fld)
    with _FIELD_LOCK:
        return _FIELD_CACHE.setdefault(key, (fld, dmap))


# ---------------------------------------------------------------------------
# trial loop
# ---------------------------------------------------------------------------

def run_trial(cfg: TrialConfig, scatter_step: Optional[int] = None,
              frame_every: int = 0, frame_cb=None) -> TrialRecord:
    """Run one seeded trial to ``cfg.max_steps``.

    ``cfg.seed`` is used directly as the trial seed (study drivers derive it
    from their master seed per trial).  The metric is recorded at step 0 and
    after every ``sample_interval``-th step; the final value is always
    appended.  ``scatter_step`` rescatters all pucks when the step counter
    reaches it.  When ``frame_every`` > 0, ``frame_cb(world, step)`` fires at
    step 0 and after every ``frame_every``-th step (chunking the loop this
    way does not alter the trajectory).
    """
    t0 = time.perf_counter()
    fld, dmap = _field_bundle(cfg)
    geometry = sensor_geometry(cfg)
    params = controller_params(cfg)
    rng = Rng(cfg.seed)
    world = spawn_random(cfg.arena_width, cfg.arena_height, cfg.n_robots,
                         cfg.n_pucks, cfg.robot_radius, cfg.puck_radius, rng,
                         margin=cfg.margin, max_attempts=cfg.place_attempts)
    if scatter_step is not None and not (0 <= scatter_step < cfg.max_steps):
        raise ParameterError(
            f"scatter_step {scatter_step} must lie in [0, max_steps)")

    nr = cfg.n_robots
    w = params.stuck_window
    hist = np.zeros((nr, w, 3), dtype=np.float64)
    hist_count = np.zeros(nr, dtype=np.int64)
    hist_pos = np.zeros(nr, dtype=np.int64)
    pose_hist = np.zeros((nr, w, 2), dtype=np.float64)
    kick_count = np.zeros(nr, dtype=np.int64)
    rec_rem = np.zeros(nr, dtype=np.int64)
    rec_v = np.zeros(nr, dtype=np.float64)
    rec_w = np.zeros(nr, dtype=np.float64)
    q_left = np.zeros((nr, cfg.queue_len), dtype=np.float64)
    q_right = np.zeros((nr, cfg.queue_len), dtype=np.float64)
    q_count = np.zeros(nr, dtype=np.int64)
    q_pos = np.zeros(nr, dtype=np.int64)

    interval = cfg.sample_interval
    n_slots = (cfg.max_steps // interval + 2) if interval > 0 else 2
    out_steps = np.zeros(n_slots, dtype=np.int64)
    out_props = np.zeros(n_slots, dtype=np.float64)
    out_cursor = np.zeros(1, dtype=np.int64)
    trace = np.zeros((0, 11), dtype=np.float64)
    trace_cursor = np.zeros(1, dtype=np.int64)

    olx, oly = (float(geometry.offsets[0, 0]), float(geometry.offsets[0, 1]))
    ocx, ocy = (float(geometry.offsets[1, 0]), float(geometry.offsets[1, 1]))
    orx, ory = (float(geometry.offsets[2, 0]), float(geometry.offsets[2, 1]))
    scat = -1 if scatter_step is None else int(scatter_step)

    samples = [(0, proportion_in_goal(world, dmap))] if interval > 0 else []
    if frame_every > 0 and frame_cb is not None:
        frame_cb(world, 0)

    done = 0
    while done < cfg.max_steps:
        chunk = cfg.max_steps - done
        if frame_every > 0:
            chunk = min(chunk, frame_every)
        bad = kernels.advance(
            fld.values, fld.cell_size, dmap.distances,
            world.robot_xy, world.robot_theta, world.robot_radius,
            world.puck_xy, world.puck_radius,
            world.arena_width, world.arena_height,
            olx, oly, ocx, ocy, orx, ory,
            geometry.puck_fov_radius, geometry.robot_fov_radius,
            geometry.fov_halfangle, geometry._camera_flag,
            geometry.wall_deadband,
            geometry._interp_flag,
            1 if cfg.sensing == "queued" else 0,
            q_left, q_right, q_count, q_pos,
            params.vmax, params.wmax, params.puck_variant, params.align_variant,
            params.black_threshold, params.stuck_window, params.stuck_epsilon,
            params.stuck_move_epsilon, params.recovery_duration,
            params.kick_interval,
            hist, hist_count, hist_pos, pose_hist, kick_count,
            rec_rem, rec_v, rec_w,
            cfg.dt, MIN_SWEEPS, MAX_SWEEPS, OVERLAP_TOL,
            done, chunk, scat, cfg.margin, cfg.place_attempts,
            interval, rng.state,
            out_steps, out_props, out_cursor, trace, trace_cursor)
        if bad != 0:
            raise PlacementError("puck rescatter failed to find positions")
        done += chunk
        world.step_count = done
        if frame_every > 0 and frame_cb is not None:
            frame_cb(world, done)

    n = int(out_cursor[0])
    samples.extend(zip(out_steps[:n].tolist(), out_props[:n].tolist()))
    final = proportion_in_goal(world, dmap)
    if not samples or samples[-1][0] != cfg.max_steps:
        samples.append((cfg.max_steps, final))
    steps = np.array([s for s, _ in samples], dtype=np.int64)
    props = np.array([p for _, p in samples], dtype=np.float64)
    return TrialRecord(config=cfg, steps=steps, proportions=props,
                       final_proportion=final,
                       wall_time=time.perf_counter() - t0,
                       final_world=world, scatter_step=scatter_step)


def run_trials(configs, threads: int = 1, scatter_step: Optional[int] = None):
    """Run many trials, optionally across threads; results come back in the
    order of ``configs`` regardless of thread scheduling."""
    configs = list(configs)
    if threads <= 1 or len(configs) <= 1:
        return [run_trial(c, scatter_step=scatter_step) for c in configs]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        futures = [ex.submit(run_trial, c, scatter_step) for c in configs]
        return [f.result() for f in futures]


def time_to_threshold(record: TrialRecord, threshold: float) -> float:
    """First sampled step at which the metric reaches ``threshold``;
    ``inf`` when it never does."""
    hits = np.nonzero(record.proportions >= threshold)[0]
    return float(record.steps[hits[0]]) if hits.size else float("inf")


# ---------------------------------------------------------------------------
# studies
# ---------------------------------------------------------------------------

def _summarize(group, records) -> SweepSummary:
    if len(records) < 2:
        raise ParameterError("summaries need at least 2 trials")
    steps = records[0].steps
    mat = np.stack([r.proportions for r in records])
    mean = mat.mean(axis=0)
    sd = mat.std(axis=0, ddof=1)
    ci = 1.96 * sd / np.sqrt(mat.shape[0])
    return SweepSummary(group=group, steps=steps.copy(), mean=mean,
                        ci_half=ci, n_trials=len(records))


def sweep_robot_count(base: TrialConfig, counts=DEFAULT_SWEEP_COUNTS,
                      trials: int = 30, threads: int = 1,
                      master_seed: Optional[int] = None,
                      return_records: bool = False):
    """The robot-count study: ``trials`` independent trials per count.

    Trial seeds are ``trial_seed(master, "sweep", count_index, trial_index)``
    with the master seed defaulting to ``base.seed``.  Returns one
    :class:`SweepSummary` per count (optionally also the raw records, as
    a dict keyed by count).
    """
    if trials < 2:
        raise ParameterError("sweep needs at least 2 trials per group")
    master = base.seed if master_seed is None else master_seed
    configs = []
    for gi, count in enumerate(counts):
        for t in range(trials):
            configs.append(replace(base, n_robots=int(count),
                                   seed=trial_seed(master, "sweep", gi, t)))
    records = run_trials(configs, threads=threads)
    summaries = []
    by_count = {}
    for gi, count in enumerate(counts):
        group = records[gi * trials:(gi + 1) * trials]
        by_count[int(count)] = group
        summaries.append(_summarize(int(count), group))
    if return_records:
        return summaries, by_count
    return summaries


def perturbation_trial(cfg: TrialConfig,
                       scatter_step: int = DEFAULT_SCATTER_STEP) -> TrialRecord:
    """A single trial whose pucks are randomly repositioned when the step
    counter reaches ``scatter_step``."""
    return run_trial(cfg, scatter_step=scatter_step)


def perturbation_study(base: TrialConfig, trials: int = 30,
                       scatter_step: int = DEFAULT_SCATTER_STEP,
                       threads: int = 1, master_seed: Optional[int] = None):
    """``trials`` perturbation trials seeded
    ``trial_seed(master, "perturb", 0, trial_index)``."""
    master = base.seed if master_seed is None else master_seed
    configs = [replace(base, seed=trial_seed(master, "perturb", 0, t))
               for t in range(trials)]
    return run_trials(configs, threads=threads, scatter_step=scatter_step)


def plateau_levels(record: TrialRecord, scatter_step: int, window: int = 200):
    """(pre, post) plateau estimates: mean metric over the ``window`` steps
    before the scatter and over the final ``window`` steps."""
    pre_mask = (record.steps >= scatter_step - window) & (record.steps < scatter_step)
    post_mask = record.steps >= record.steps[-1] - window
    if not pre_mask.any() or not post_mask.any():
        raise ParameterError("plateau window contains no samples")
    return (float(record.proportions[pre_mask].mean()),
            float(record.proportions[post_mask].mean()))


def radius_ablation(base: TrialConfig, radii=DEFAULT_ABLATION_RADII,
                    trials: int = 10, threads: int = 1,
                    master_seed: Optional[int] = None):
    """The puck-sensing-radius study on the configured field (the L shape by
    default usage).

    For each radius the puck detection range is set to it; the robot
    detection range is clamped to ``min(base.robot_fov, radius)`` to keep the
    robot-sensing circle the smaller one.  Seeds are
    ``trial_seed(master, "ablate", radius_index, trial_index)``.  Reports the
    mean final in-goal proportion and mean goal coverage per radius.
    """
    for r in radii:
        if not (r > 0):
            raise ParameterError(f"radii must be positive, got {r}")
    master = base.seed if master_seed is None else master_seed
    configs = []
    for gi, radius in enumerate(radii):
        for t in range(trials):
            configs.append(replace(
                base, puck_fov=float(radius),
                robot_fov=min(base.robot_fov, float(radius)),
                seed=trial_seed(master, "ablate", gi, t)))
    records = run_trials(configs, threads=threads)
    fld, _ = _field_bundle(base)
    results = []
    for gi, radius in enumerate(radii):
        group = records[gi * trials:(gi + 1) * trials]
        finals = [r.final_proportion for r in group]
        covers = [goal_coverage(r.final_world, fld) for r in group]
        results.append(AblationResult(
            radius=float(radius),
            mean_final_proportion=float(np.mean(finals)),
            mean_goal_coverage=float(np.mean(covers)),
            records=tuple(group)))
    return results


def variant_search(base: TrialConfig,
                   trials_per_combo: int = DEFAULT_SEARCH_TRIALS,
                   threads: int = 1, master_seed: Optional[int] = None,
                   search_steps: int = DEFAULT_SEARCH_STEPS,
                   refine_top: int = DEFAULT_REFINE_TOP,
                   refine_steps: Optional[int] = None,
                   progress=None) -> SearchResult:
    """Exhaustive search over all 64 x 64 (puck_variant, align_variant)
    combos at a reduced step budget, ranked by mean final proportion, then a
    full-budget re-evaluation of the ``refine_top`` leaders.

    Combo ``(pv, av)`` has group id ``pv * 64 + av``; its trials are seeded
    ``trial_seed(master, "search", group_id, trial_index)`` and the refine
    pass uses group id ``4096 + group_id``, so the ranking is deterministic
    and independent of evaluation order and thread count.
    """
    if trials_per_combo < 1:
        raise ParameterError("trials_per_combo must be at least 1")
    master = base.seed if master_seed is None else master_seed
    full_steps = base.max_steps if refine_steps is None else refine_steps

    def eval_combo(pv, av, steps, seed_group):
        finals = []
        for t in range(trials_per_combo):
            cfg = replace(base, puck_variant=pv, align_variant=av,
                          max_steps=steps, sample_interval=0,
                          seed=trial_seed(master, "search", seed_group, t))
            finals.append(run_trial(cfg).final_proportion)
        return float(np.mean(finals))

    combos = [(pv, av) for pv in range(64) for av in range(64)]
    means = [0.0] * len(combos)
    if threads <= 1:
        for gi, (pv, av) in enumerate(combos):
            means[gi] = eval_combo(pv, av, search_steps, gi)
            if progress is not None:
                progress(gi + 1, len(combos))
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            futures = [ex.submit(eval_combo, pv, av, search_steps, gi)
                       for gi, (pv, av) in enumerate(combos)]
            for gi, f in enumerate(futures):
                means[gi] = f.result()
                if progress is not None:
                    progress(gi + 1, len(combos))
    scores = [VariantScore(pv, av, means[gi], trials_per_combo)
              for gi, (pv, av) in enumerate(combos)]
    scores.sort(key=lambda s: (-s.mean_final, s.puck_variant, s.align_variant))

    top = scores[:max(0, refine_top)]
    refined_means = []
    if top:
        if threads <= 1:
            for s in top:
                gid = 4096 + s.puck_variant * 64 + s.align_variant
                refined_means.append(eval_combo(s.puck_variant, s.align_variant,
                                                full_steps, gid))
        else:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                futures = [ex.submit(eval_combo, s.puck_variant, s.align_variant,
                                     full_steps,
                                     4096 + s.puck_variant * 64 + s.align_variant)
                           for s in top]
                refined_means = [f.result() for f in futures]
    refined = [VariantScore(s.puck_variant, s.align_variant, m, trials_per_combo)
               for s, m in zip(top, refined_means)]
    refined.sort(key=lambda s: (-s.mean_final, s.puck_variant, s.align_variant))
    return SearchResult(scores=tuple(scores), refined=tuple(refined),
                        trials_per_combo=trials_per_combo,
                        search_steps=search_steps, refine_steps=full_steps)


def flow_field(fld: ScalarField, params, grid_spacing: float,
               steps: int = DEFAULT_FLOW_STEPS, *, geometry=None,
               robot_radius: float = 35.0, dt: float = 1.0,
               n_headings: int = 8, master_seed: int = 0):
    """Average lone-robot displacement on a grid of start points.

    At each grid point ``((i + 0.5) s, (j + 0.5) s)`` a single robot (no
    pucks, no peers) runs ``steps`` control steps from each of ``n_headings``
    evenly spaced initial headings; the displacement from the pose after a
    ``steps // 2`` burn-in to the final pose is averaged over headings.
    Returns a list of :class:`FlowVector`, row-major from the bottom-left.
    """
    if steps < 1:
        raise ParameterError("steps must be at least 1")
    if not (grid_spacing > 0):
        raise ParameterError("grid_spacing must be positive")
    if geometry is None:
        from .sensors import SensorGeometry
        geometry = SensorGeometry.for_robot_radius(robot_radius)
    o = geometry.offsets
    burn = steps // 2
    nx = int(fld.arena_width // grid_spacing)
    ny = int(fld.arena_height // grid_spacing)
    out = []
    idx = 0
    for j in range(ny):
        for i in range(nx):
            x0 = (i + 0.5) * grid_spacing
            y0 = (j + 0.5) * grid_spacing
            rng = Rng(trial_seed(master_seed, "flow", idx, 0))
            dx, dy = kernels.flow_rollout(
                fld.values, fld.cell_size, float(x0), float(y0),
                fld.arena_width, fld.arena_height, float(robot_radius),
                float(o[0, 0]), float(o[0, 1]), float(o[1, 0]),
                float(o[1, 1]), float(o[2, 0]), float(o[2, 1]),
                geometry._interp_flag,
                params.vmax, params.wmax, params.puck_variant,
                params.align_variant, params.black_threshold,
                params.stuck_window, params.stuck_epsilon,
                params.stuck_move_epsilon, params.recovery_duration,
                params.kick_interval,
                int(n_headings), int(steps), int(burn), float(dt), rng.state)
            out.append(FlowVector(float(x0), float(y0), float(dx), float(dy)))
            idx += 1
    return out


def signed_circulation(vectors, center) -> float:
    """Net tangential sense of a flow field around ``center``: the sum over
    vectors of the cross product between the unit radial direction and the
    displacement.  Negative means clockwise circulation."""
    cx, cy = center
    total = 0.0
    for v in vectors:
        rx = v.x - cx
        ry = v.y - cy
        norm = float(np.hypot(rx, ry))
        if norm == 0.0:
            continue
        total += (rx * v.dy - ry * v.dx) / norm
    return total


# ---------------------------------------------------------------------------
# CSV serialization (documented headers; repr floats for exact round-trips)
# ---------------------------------------------------------------------------

def trial_csv_lines(record: TrialRecord):
    """Header ``step,proportion`` then one row per sample."""
    lines = ["step,proportion"]
    for s, p in zip(record.steps.tolist(), record.proportions.tolist()):
        lines.append(f"{s},{p!r}")
    return lines


def sweep_csv_lines(summaries):
    """Header ``robots,step,mean,ci_half``; groups in given order."""
    lines = ["robots,step,mean,ci_half"]
    for summ in summaries:
        for s, m, c in zip(summ.steps.tolist(), summ.mean.tolist(),
                           summ.ci_half.tolist()):
            lines.append(f"{summ.group},{s},{m!r},{c!r}")
    return lines


def ablation_csv_lines(results):
    """Header ``radius,mean_final_proportion,mean_goal_coverage,trials``."""
    lines = ["radius,mean_final_proportion,mean_goal_coverage,trials"]
    for r in results:
        lines.append(f"{r.radius!r},{r.mean_final_proportion!r},"
                     f"{r.mean_goal_coverage!r},{len(r.records)}")
    return lines


def search_csv_lines(scores):
    """Header ``puck_variant,align_variant,mean_final,trials``, ranked order."""
    lines = ["puck_variant,align_variant,mean_final,trials"]
    for s in scores:
        lines.append(f"{s.puck_variant},{s.align_variant},{s.mean_final!r},{s.trials}")
    return lines


def flow_csv_lines(vectors):
    """Header ``x,y,dx,dy``, row-major from the bottom-left."""
    lines = ["x,y,dx,dy"]
    for v in vectors:
        lines.append(f"{v.x!r},{v.y!r},{v.dx!r},{v.dy!r}")
    return lines
