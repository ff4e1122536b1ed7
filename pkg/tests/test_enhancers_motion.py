import math

import numpy as np
import pytest
from scipy import stats

import flowsup as fs


def test_zero_sigma_gives_constant_velocity():
    rng = np.random.default_rng(0)
    traj = fs.markov_trajectory(fs.MotionState(3.0, -1.0), 10, 0.0, 0.0, rng)
    assert all(s.u == 3.0 and s.v == -1.0 for s in traj)
    # integrated positions are exactly linear in t
    pos = np.cumsum([[s.u, s.v] for s in traj], axis=0)
    assert np.array_equal(pos, np.outer(np.arange(1, 11), [3.0, -1.0]))


def test_increment_statistics():
    rng = np.random.default_rng(7)
    n = 100_000
    sigma_u, sigma_v = 0.8, 0.3
    traj = fs.markov_trajectory(fs.MotionState(0.0, 0.0), n + 1,
                                sigma_u, sigma_v, rng)
    arr = np.array([[s.u, s.v] for s in traj])
    inc = np.diff(arr, axis=0)
    assert abs(inc[:, 0].mean()) < 3 * sigma_u / math.sqrt(n)
    assert abs(inc[:, 1].mean()) < 3 * sigma_v / math.sqrt(n)
    assert abs(inc[:, 0].std() - sigma_u) < 0.05 * sigma_u
    assert abs(inc[:, 1].std() - sigma_v) < 0.05 * sigma_v


def test_trajectory_determinism():
    t1 = fs.markov_trajectory(fs.MotionState(1.0, 2.0), 50, 0.5, 0.5,
                              np.random.default_rng(42))
    t2 = fs.markov_trajectory(fs.MotionState(1.0, 2.0), 50, 0.5, 0.5,
                              np.random.default_rng(42))
    assert t1 == t2


def test_initial_state_speed_matches_truncated_normal():
    rng = np.random.default_rng(3)
    mu = 3.0
    sigma = mu / 3.0
    n = 100_000
    speeds = np.array([math.hypot(s.u, s.v) for s in
                       (fs.sample_initial_state(mu, rng) for _ in range(n))])
    # E[max(0, X)] for X ~ N(mu, sigma)
    z = mu / sigma
    expected = mu * stats.norm.cdf(z) + sigma * stats.norm.pdf(z)
    assert abs(speeds.mean() - expected) / expected < 0.01


def test_initial_state_angle_uniform():
    rng = np.random.default_rng(5)
    n = 100_000
    angles = []
    for _ in range(n):
        s = fs.sample_initial_state(2.0, rng)
        angles.append(math.atan2(s.v, s.u) % (2 * math.pi))
    hist, _ = np.histogram(angles, bins=36, range=(0.0, 2 * math.pi))
    _, p = stats.chisquare(hist)
    assert p > 0.01


def test_initial_state_determinism():
    a = fs.sample_initial_state(4.0, np.random.default_rng(9))
    b = fs.sample_initial_state(4.0, np.random.default_rng(9))
    assert a == b


def test_parameter_validation():
    rng = np.random.default_rng(0)
    with pytest.raises(fs.ParameterError):
        fs.sample_initial_state(0.0, rng)
    with pytest.raises(fs.ParameterError):
        fs.markov_trajectory(fs.MotionState(0, 0), 0, 0.1, 0.1, rng)
    with pytest.raises(fs.ParameterError):
        fs.markov_trajectory(fs.MotionState(0, 0), 5, -0.1, 0.1, rng)
