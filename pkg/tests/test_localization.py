import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dotswarm.geometry import Pose2D, compose
from dotswarm.localization import (CHI2_GATE, EkfState, FixRejected, PoseFilter, PoseFix, initial_state,
                                   innovation, map_to_odom, predict, update)
from dotswarm.replay import ReplayConfig, run_square, square_truth
from dotswarm.sensing import OdometryDelta

angles = st.floats(-math.pi, math.pi)
small = st.floats(-0.05, 0.05)


def _numeric_jacobian(mean, d):
    f = lambda v: np.array(compose(Pose2D(*v), d))
    x0 = np.array(mean)
    J = np.zeros((3, 3))
    for k in range(3):
        e = np.zeros(3)
        e[k] = 1e-6
        diff = f(x0 + e) - f(x0 - e)
        diff[2] = math.remainder(diff[2], 2 * math.pi)
        J[:, k] = diff / 2e-6
    return J


def test_predict_straight_line():
    s = initial_state(Pose2D(0, 0, math.pi / 2), np.zeros((3, 3)))
    out = predict(s, OdometryDelta(Pose2D(0.1, 0, 0), 0.01), Q=np.zeros((3, 3)))
    assert out.mean == pytest.approx((0.0, 0.1, math.pi / 2))
    assert np.allclose(out.cov, 0.0)


@settings(max_examples=50)
@given(angles, small, small, small)
def test_predict_covariance_matches_numeric_jacobian(theta, dx, dy, dth):
    P = np.diag([0.01, 0.02, 0.03])
    s = EkfState(Pose2D(0.3, -0.2, theta), P)
    d = Pose2D(dx, dy, dth)
    out = predict(s, OdometryDelta(d, 0.01), Q=np.zeros((3, 3)))
    J = _numeric_jacobian(s.mean, d)
    assert np.allclose(out.cov, J @ P @ J.T, atol=1e-8)


def test_predict_adds_rotated_body_noise():
    s = initial_state(Pose2D(0, 0, math.pi / 2), np.zeros((3, 3)))
    Q = np.diag([4.0, 1.0, 0.0]) * 1e-4
    out = predict(s, OdometryDelta(Pose2D(), 0.01), Q=Q)
    assert np.allclose(np.diag(out.cov), [1e-4, 4e-4, 0.0])
    with pytest.raises(ValueError):
        predict(s, OdometryDelta(Pose2D(), 0.0))


def test_update_diagonal_gain():
    s = EkfState(Pose2D(0, 0, 0), np.diag([0.04, 0.04, 0.01]))
    R = np.diag([0.01, 0.04, 0.01])
    out = update(s, PoseFix(Pose2D(0.1, 0.1, 0.1), R))
    # scalar Kalman gain per axis: P / (P + R)
    assert out.mean == pytest.approx((0.08, 0.05, 0.05))
    assert np.allclose(np.diag(out.cov), [0.008, 0.02, 0.005])


def test_update_gate():
    s = EkfState(Pose2D(0, 0, 0), np.eye(3) * 1e-4)
    R = np.eye(3) * 1e-4
    with pytest.raises(FixRejected) as e:
        update(s, PoseFix(Pose2D(1.0, 0, 0), R))
    assert e.value.mahalanobis2 > CHI2_GATE
    pf = PoseFilter(Pose2D(), np.eye(3) * 1e-4)
    assert not pf.update(PoseFix(Pose2D(1.0, 0, 0), R)) and pf.rejected == 1
    assert pf.state.mean == (0.0, 0.0, 0.0)


def test_innovation_wraps_angle():
    s = EkfState(Pose2D(0, 0, 3.1), np.eye(3))
    y = innovation(s, PoseFix(Pose2D(0, 0, -3.1), np.eye(3)))
    assert y[2] == pytest.approx(2 * math.pi - 6.2)
    out = update(s, PoseFix(Pose2D(0, 0, -3.1), np.eye(3) * 1e-6))
    assert abs(abs(out.mean.theta) - 3.1) < 1e-3


@settings(max_examples=50)
@given(st.lists(st.tuples(small, small, small), min_size=1, max_size=20), st.integers(0, 2 ** 16))
def test_covariance_stays_symmetric_positive_definite(steps, seed):
    rng = np.random.default_rng(seed)
    pf = PoseFilter(Pose2D())
    R = np.diag([1e-4, 1e-4, 1e-4])
    for dx, dy, dth in steps:
        pf.predict(OdometryDelta(Pose2D(dx, dy, dth), 0.01))
        m = pf.state.mean
        pf.update(PoseFix(Pose2D(m.x + 0.01 * rng.standard_normal(), m.y, m.theta), R))
        P = pf.state.cov
        assert np.allclose(P, P.T)
        assert np.all(np.linalg.eigvalsh(P) > 0)


def test_map_to_odom():
    s = EkfState(Pose2D(1.0, 2.0, 0.5), np.eye(3))
    odom = Pose2D(0.3, -0.1, 0.2)
    assert compose(map_to_odom(s, odom), odom) == pytest.approx(tuple(s.mean))


def test_square_truth_closes():
    t, pos = square_truth(ReplayConfig())
    assert pos[0] == pytest.approx(pos[-1], abs=1e-9)
    assert np.all(np.diff(t) > 0)


def test_replay_rmse_small():
    err = run_square(ReplayConfig(), np.random.default_rng(3))
    rmse = np.sqrt(np.mean(err[len(err) // 10:, :2] ** 2, axis=0))
    assert np.all(rmse < 0.02)
