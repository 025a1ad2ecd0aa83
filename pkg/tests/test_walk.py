import numpy as np
import pytest

from interlacesim.lattice import BoxRegion, SiteFunction, SiteSet
from interlacesim.rng import RngStream
from interlacesim.walk import (
    CENSORED,
    HIT,
    excursion_decompose,
    occupation_functional,
    sample_start,
    sample_walk,
    stopping_times,
    Trajectory,
)


def test_degenerate_kill_box():
    kill = BoxRegion((5, 5, 5), (1, 1, 1))
    traj = sample_walk((0, 0, 0), kill, RngStream(1))
    assert traj.terminal_reason == "degenerate"
    assert len(traj.skeleton) == 1


def test_skeleton_validity_and_reproducibility():
    kill = BoxRegion.centered_ball(15, 3)
    t1 = sample_walk((0, 0, 0), kill, RngStream(42, 7))
    t2 = sample_walk((0, 0, 0), kill, RngStream(42, 7))
    assert np.array_equal(t1.skeleton, t2.skeleton)
    assert np.array_equal(t1.holds, t2.holds)
    steps = np.diff(t1.skeleton, axis=0)
    assert np.all(np.abs(steps).sum(axis=1) == 1)
    assert t1.terminal_reason == "exit"
    assert kill.contains_array(t1.skeleton[:-1]).all()
    assert not kill.contains(t1.skeleton[-1])
    t3 = sample_walk((0, 0, 0), kill, RngStream(42, 8))
    assert not np.array_equal(t1.skeleton, t3.skeleton)


def test_step_distribution_uniform():
    kill = BoxRegion.centered_ball(2000, 3)
    traj = sample_walk((0, 0, 0), kill, RngStream(5), max_steps=100_000, block=100_000)
    steps = np.diff(traj.skeleton, axis=0)
    n = len(steps)
    assert n >= 100_000 - 1
    p = 1.0 / 6.0
    sigma = np.sqrt(p * (1 - p) * n)
    for axis in range(3):
        for sign in (-1, 1):
            cnt = int(np.sum(steps[:, axis] == sign))
            assert abs(cnt - n * p) < 4 * sigma


def test_holding_times_exponential():
    kill = BoxRegion.centered_ball(2000, 3)
    traj = sample_walk((0, 0, 0), kill, RngStream(6), max_steps=100_000, block=100_000)
    h = traj.holds
    assert np.all(h > 0)
    assert abs(h.mean() - 1.0) < 0.02
    assert abs(np.var(h) - 1.0) < 0.05


def test_stopping_times_basic():
    kill = BoxRegion.centered_ball(30, 3)
    win = BoxRegion.centered_ball(5, 3)
    A = SiteSet.from_box(BoxRegion((0, 0, 0), (1, 1, 1)), win)
    U = BoxRegion.centered_ball(4, 3)
    traj = sample_walk((0, 0, 0), kill, RngStream(9))
    H_A, T_U, Ht_A = stopping_times(traj, A, U)
    assert H_A.status == HIT and H_A.time == 0.0
    assert T_U.status == HIT
    assert T_U.time <= traj.times()[-1]
    if Ht_A.status == HIT:
        assert Ht_A.time >= traj.holds[0]


def test_stopping_censored_when_unreached():
    kill = BoxRegion.centered_ball(6, 3)
    win = BoxRegion.centered_ball(30, 3)
    A = SiteSet.from_points(win, [(20, 20, 20)])
    traj = sample_walk((0, 0, 0), kill, RngStream(10))
    H_A, _, _ = stopping_times(traj, A, BoxRegion.centered_ball(40, 3))
    assert H_A.status == CENSORED


def _hand_built(path_sites, kill):
    skel = np.array(path_sites, dtype=np.int64)
    return Trajectory(
        start=tuple(path_sites[0]),
        skeleton=skel,
        kill=kill,
        terminal_reason="exit",
        hold_stream=RngStream(0, 1),
    )


def test_excursion_decompose_hand_built():
    # A = {0}, U = ball(1): enter A, leave U, re-enter, leave: N = 2
    kill = BoxRegion.centered_ball(10, 3)
    win = BoxRegion.centered_ball(3, 3)
    A = SiteSet.from_points(win, [(0, 0, 0)])
    U = BoxRegion.centered_ball(1, 3)
    path = [
        (0, 0, 0), (1, 0, 0), (2, 0, 0),  # excursion 1 ends at (2,0,0)
        (1, 0, 0), (0, 0, 0), (0, 1, 0), (0, 2, 0),  # excursion 2
        (0, 3, 0),
    ]
    traj = _hand_built(path, kill)
    records, n, censored = excursion_decompose(traj, A, U)
    assert n == 2 and not censored
    assert records[0].r_index == 0 and records[0].d_index == 2
    assert records[1].r_index == 4 and records[1].d_index == 6
    assert tuple(records[0].path[0]) == (0, 0, 0)
    assert not U.contains(records[0].path[-1])


def test_excursion_decompose_never_entering():
    kill = BoxRegion.centered_ball(10, 3)
    win = BoxRegion.centered_ball(3, 3)
    A = SiteSet.from_points(win, [(0, 0, 0)])
    U = BoxRegion.centered_ball(2, 3)
    path = [(2, 2, 2), (2, 2, 3), (2, 2, 4)]
    traj = _hand_built(path, kill)
    records, n, censored = excursion_decompose(traj, A, U)
    assert records == [] and n == 0 and not censored


def test_excursion_censored_tail():
    kill = BoxRegion.centered_ball(10, 3)
    win = BoxRegion.centered_ball(3, 3)
    A = SiteSet.from_points(win, [(0, 0, 0)])
    U = BoxRegion.centered_ball(20, 3)  # beyond the kill box: never departs
    path = [(0, 0, 0), (1, 0, 0)]
    traj = Trajectory((0, 0, 0), np.array(path), kill, "exit", RngStream(0, 2))
    records, n, censored = excursion_decompose(traj, A, U)
    assert n == 0 and censored


def test_occupation_functional():
    kill = BoxRegion.centered_ball(10, 3)
    f0 = SiteFunction(BoxRegion.centered_ball(2, 3), np.zeros((5, 5, 5)))
    traj = sample_walk((0, 0, 0), kill, RngStream(12))
    assert occupation_functional(traj, f0) == 0.0
    # indicator of the start: if the walk never returns, equals first hold
    vals = np.zeros((5, 5, 5))
    vals[2, 2, 2] = 1.0
    f1 = SiteFunction(BoxRegion.centered_ball(2, 3), vals)
    for seed in range(30):
        traj = sample_walk((0, 0, 0), kill, RngStream(100 + seed))
        visits = np.all(traj.skeleton == 0, axis=1)
        expect = traj.holds[visits].sum()
        assert occupation_functional(traj, f1) == pytest.approx(expect, rel=1e-12)


def test_sample_start_point_mass_and_uniform():
    sites = np.array([[0, 0, 0], [1, 0, 0]])
    pt = sample_start(sites[:1], np.array([2.0]), RngStream(3))
    assert pt == (0, 0, 0)
    gen_counts = [0, 0]
    for k in range(10_000):
        p = sample_start(sites, np.array([1.0, 1.0]), RngStream(3, k))
        gen_counts[p[0]] += 1
    n, p = 10_000, 0.5
    assert abs(gen_counts[0] - n * p) < 4 * np.sqrt(n * p * (1 - p))
    with pytest.raises(ValueError):
        sample_start(sites, np.array([0.0, 0.0]), RngStream(3))
