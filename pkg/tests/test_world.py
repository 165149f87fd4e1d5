"""Arena state, unicycle integration, collision resolution, serialization,
and random placement."""

import numpy as np
import pytest

from oc2sim.errors import ParameterError, PlacementError
from oc2sim.rng import Rng
from oc2sim.world import (Action, PuckBody, RobotBody, World,
                          integrate_unicycle, resolve_collisions,
                          scatter_pucks, spawn_random, step)


def wrap_reference(a):
    return ((a + np.pi) % (2.0 * np.pi)) - np.pi


def one_robot_world(x=100.0, y=100.0, th=0.0, r=10.0, pucks=(),
                    extent=400.0):
    return World.build(extent, extent, robots=[(x, y, th, r)], pucks=pucks)


# ---------------------------------------------------------------------------
# construction and views
# ---------------------------------------------------------------------------

def test_world_validates_inputs():
    with pytest.raises(ParameterError):
        World.build(0.0, 100.0)
    with pytest.raises(ParameterError):
        World(100.0, 100.0, np.zeros((2, 2)), np.zeros(1), np.ones(2),
              np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(ParameterError):
        World.build(100.0, 100.0, robots=[(10.0, 10.0, 0.0, 0.0)])
    with pytest.raises(ParameterError):
        World.build(100.0, 100.0, pucks=[(10.0, 10.0, -1.0)])


def test_build_accepts_bodies_and_tuples():
    w = World.build(200.0, 200.0,
                    robots=[RobotBody(10.0, 20.0, 0.5, 5.0)],
                    pucks=[(30.0, 40.0, 2.0), PuckBody(50.0, 60.0, 3.0)])
    assert w.n_robots == 1 and w.n_pucks == 2
    r = w.robot(0)
    assert (r.x, r.y, r.theta, r.radius, r.id) == (10.0, 20.0, 0.5, 5.0, 0)
    assert [p.id for p in w.pucks()] == [0, 1]
    assert w.puck(1).radius == 3.0


def test_copy_is_independent():
    w = one_robot_world(pucks=[(50.0, 50.0, 4.0)])
    c = w.copy()
    c.robot_xy[0, 0] = 999.0
    c.puck_xy[0, 1] = 999.0
    assert w.robot_xy[0, 0] == 100.0
    assert w.puck_xy[0, 1] == 50.0


# ---------------------------------------------------------------------------
# unicycle integration
# ---------------------------------------------------------------------------

def test_integrate_turns_before_translating():
    r = RobotBody(0.0, 0.0, 0.0, 1.0)
    out = integrate_unicycle(r, Action(1.0, np.pi / 2.0), dt=1.0)
    assert out.theta == pytest.approx(np.pi / 2.0)
    assert out.x == pytest.approx(0.0, abs=1e-12)
    assert out.y == pytest.approx(1.0)


def test_integrate_matches_closed_form():
    rs = np.random.RandomState(1)
    for _ in range(50):
        x, y = rs.uniform(-50, 50, size=2)
        th = rs.uniform(-4, 4)
        v, w = rs.uniform(-3, 3), rs.uniform(-2, 2)
        dt = float(rs.choice([0.5, 1.0, 2.0]))
        out = integrate_unicycle(RobotBody(x, y, th, 1.0), (v, w), dt)
        th2 = wrap_reference(th + w * dt)
        assert out.theta == pytest.approx(th2, abs=1e-12)
        assert out.x == pytest.approx(x + v * dt * np.cos(th2), abs=1e-9)
        assert out.y == pytest.approx(y + v * dt * np.sin(th2), abs=1e-9)
        assert -np.pi <= out.theta < np.pi


def test_integrate_zero_action_is_identity():
    r = RobotBody(3.0, 4.0, 0.7, 1.0)
    out = integrate_unicycle(r, (0.0, 0.0))
    assert (out.x, out.y, out.theta) == (3.0, 4.0, 0.7)


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------

def test_step_requires_one_action_per_robot():
    w = one_robot_world()
    with pytest.raises(ParameterError):
        w.step([])
    with pytest.raises(ParameterError):
        w.step([(1.0, 0.0), (1.0, 0.0)])


def test_step_accepts_actions_and_tuples():
    w = one_robot_world(th=0.0)
    w.step([Action(2.0, 0.0)])
    assert w.robot_xy[0, 0] == pytest.approx(102.0)
    w.step([(1.0, 0.0)])
    assert w.robot_xy[0, 0] == pytest.approx(103.0)
    assert w.step_count == 2


def test_step_clamps_robot_to_walls():
    w = one_robot_world(x=15.0, y=100.0, th=np.pi, r=10.0)
    for _ in range(20):
        w.step([(5.0, 0.0)])
    assert w.robot_xy[0, 0] == 10.0   # centre stops at its radius
    assert 10.0 <= w.robot_xy[0, 1] <= 390.0


def test_module_level_wrappers_mutate_in_place():
    w = one_robot_world()
    assert step(w, [(1.0, 0.0)]) is w
    assert resolve_collisions(w) is w


# ---------------------------------------------------------------------------
# collision resolution
# ---------------------------------------------------------------------------

def test_puck_pair_splits_correction_evenly():
    w = World.build(400.0, 400.0,
                    pucks=[(100.0, 100.0, 14.0), (120.0, 100.0, 14.0)])
    w.resolve_collisions()
    assert w.puck_xy[0].tolist() == pytest.approx([96.0, 100.0], abs=1e-9)
    assert w.puck_xy[1].tolist() == pytest.approx([124.0, 100.0], abs=1e-9)


def test_robot_puck_pair_splits_correction_evenly():
    w = World.build(400.0, 400.0, robots=[(100.0, 100.0, 0.0, 35.0)],
                    pucks=[(140.0, 100.0, 14.0)])
    w.resolve_collisions()
    assert w.robot_xy[0, 0] == pytest.approx(95.5, abs=1e-9)
    assert w.puck_xy[0, 0] == pytest.approx(144.5, abs=1e-9)


def test_wall_pinned_body_hands_share_to_partner():
    # The puck is already flush with the left wall; the robot must absorb
    # the entire correction instead of pushing the puck through the wall.
    w = World.build(400.0, 400.0, robots=[(40.0, 100.0, 0.0, 35.0)],
                    pucks=[(14.0, 100.0, 14.0)])
    w.resolve_collisions()
    assert w.puck_xy[0, 0] == pytest.approx(14.0, abs=1e-9)
    assert w.robot_xy[0, 0] == pytest.approx(63.0, abs=1e-9)   # 14 + 49 gap


def test_coincident_centres_separate_along_x():
    w = World.build(400.0, 400.0,
                    pucks=[(200.0, 200.0, 10.0), (200.0, 200.0, 10.0)])
    w.resolve_collisions()
    assert w.puck_xy[0, 0] == pytest.approx(190.0)
    assert w.puck_xy[1, 0] == pytest.approx(210.0)
    assert w.puck_xy[0, 1] == w.puck_xy[1, 1] == 200.0


def test_resolution_runs_at_least_min_sweeps():
    w = World.build(400.0, 400.0, pucks=[(50.0, 50.0, 5.0)])
    assert w.resolve_collisions(min_sweeps=4) >= 4


def test_random_cluster_resolves_under_tolerance():
    rs = np.random.RandomState(6)
    for _ in range(10):
        robots = [(rs.uniform(60, 140), rs.uniform(60, 140), 0.0, 20.0)
                  for _ in range(3)]
        pucks = [(rs.uniform(60, 140), rs.uniform(60, 140), 8.0)
                 for _ in range(12)]
        w = World.build(600.0, 600.0, robots=robots, pucks=pucks)
        w.resolve_collisions()
        assert max(w.max_overlap()) <= 1e-9
        assert (w.robot_xy >= 20.0).all() and (w.robot_xy <= 580.0).all()
        assert (w.puck_xy >= 8.0).all() and (w.puck_xy <= 592.0).all()


def test_chained_shove_into_distant_body_still_resolves():
    # Resolving the deep first pair shoves the middle puck into a third that
    # started beyond candidate range; the full-pairs fallback must catch it.
    w = World.build(800.0, 800.0, pucks=[(100.0, 100.0, 14.0),
                                         (101.0, 100.0, 14.0),
                                         (138.0, 100.0, 14.0)])
    w.resolve_collisions()
    assert max(w.max_overlap()) <= 1e-9


def test_max_overlap_reports_by_pair_kind():
    w = World.build(400.0, 400.0,
                    robots=[(100.0, 100.0, 0.0, 20.0), (130.0, 100.0, 0.0, 20.0)],
                    pucks=[(100.0, 130.0, 14.0)])
    rr, rp, pp = w.max_overlap()
    assert rr == pytest.approx(10.0)
    assert rp == pytest.approx(4.0)
    assert pp == 0.0


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_text_snapshot_round_trips_bit_for_bit():
    w = World.build(137.25, 400.0,
                    robots=[(np.nextafter(10.0, 11.0), 20.0, -1.234567890123, 5.0)],
                    pucks=[(1.0 / 3.0, 2.0 / 7.0, 3.5)],
                    step_count=42)
    back = World.from_text(w.to_text())
    assert back.arena_width == w.arena_width
    assert back.step_count == 42
    assert np.array_equal(back.robot_xy, w.robot_xy)
    assert np.array_equal(back.robot_theta, w.robot_theta)
    assert np.array_equal(back.puck_xy, w.puck_xy)
    assert back.to_text() == w.to_text()


@pytest.mark.parametrize("text", [
    "not a snapshot\n",
    "oc2sim-world 1\narena 100.0 100.0\nstep x\n",
    "oc2sim-world 1\narena 100.0 100.0\nstep 0\nblob 0 1 2 3 4\n",
    "oc2sim-world 1\narena 100.0 100.0\nstep 0\nrobot 0 1 2\n",
])
def test_malformed_snapshots_raise(text):
    with pytest.raises(ParameterError):
        World.from_text(text)


# ---------------------------------------------------------------------------
# random placement
# ---------------------------------------------------------------------------

def test_spawn_is_deterministic_and_overlap_free():
    a = spawn_random(800.0, 800.0, 4, 40, 35.0, 14.0, Rng(123), margin=70.0)
    b = spawn_random(800.0, 800.0, 4, 40, 35.0, 14.0, Rng(123), margin=70.0)
    assert np.array_equal(a.robot_xy, b.robot_xy)
    assert np.array_equal(a.robot_theta, b.robot_theta)
    assert np.array_equal(a.puck_xy, b.puck_xy)
    assert max(a.max_overlap()) <= 0.0
    assert (a.robot_theta >= -np.pi).all() and (a.robot_theta < np.pi).all()


def test_spawn_respects_margin():
    w = spawn_random(800.0, 800.0, 3, 20, 35.0, 14.0, Rng(9), margin=70.0)
    assert (w.robot_xy >= 105.0).all() and (w.robot_xy <= 695.0).all()
    assert (w.puck_xy >= 84.0).all() and (w.puck_xy <= 716.0).all()


def test_spawn_raises_when_arena_too_small():
    with pytest.raises(PlacementError):
        spawn_random(100.0, 100.0, 1, 0, 35.0, 14.0, Rng(1), margin=70.0)
    with pytest.raises(PlacementError):  # too crowded to ever fit
        spawn_random(200.0, 200.0, 0, 60, 35.0, 30.0, Rng(1), margin=0.0,
                     max_attempts=200)


def test_spawn_rejects_negative_counts():
    with pytest.raises(ParameterError):
        spawn_random(400.0, 400.0, -1, 0, 35.0, 14.0, Rng(1))


def test_scatter_moves_pucks_but_not_robots():
    w = spawn_random(800.0, 800.0, 2, 30, 35.0, 14.0, Rng(77))
    robots_before = w.robot_xy.copy()
    pucks_before = w.puck_xy.copy()
    scatter_pucks(w, Rng(5))
    assert np.array_equal(w.robot_xy, robots_before)
    assert not np.array_equal(w.puck_xy, pucks_before)
    assert max(w.max_overlap()) <= 0.0
    assert (w.puck_xy >= 84.0).all() and (w.puck_xy <= 716.0).all()
    # identical seed, identical rescatter
    w2 = World(800.0, 800.0, robots_before, w.robot_theta.copy(),
               w.robot_radius.copy(), pucks_before, w.puck_radius.copy())
    scatter_pucks(w2, Rng(5))
    assert np.array_equal(w2.puck_xy, w.puck_xy)
