import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dotswarm.geometry import (IDENTITY, WHEEL_MATRIX, KinematicParams, Pose2D, TransformRegistry, Twist2D,
                               UnknownFrameError, WheelSpeeds, compose, forward_kinematics, inverse_kinematics,
                               invert, relative, wrap_angle)

S32 = math.sqrt(3) / 2
angles = st.floats(-50.0, 50.0, allow_nan=False)
coords = st.floats(-10.0, 10.0, allow_nan=False)
poses = st.builds(Pose2D, coords, coords, angles)


def close(a, b, tol=1e-12):
    return all(abs(x - y) <= tol for x, y in zip(a, b))


@pytest.mark.parametrize("twist,wheels", [
    ((0, 0, 0), (0, 0, 0)),
    ((1, 0, 0), (-S32, 0, S32)),
    ((0, 0, 2), (0.2, 0.2, 0.2)),
])
def test_inverse_kinematics_examples(twist, wheels):
    assert close(inverse_kinematics(Twist2D(*twist)), wheels, 1e-15)
    assert close(forward_kinematics(WheelSpeeds(*wheels)), twist, 1e-12)


def test_matrix_inverse_is_exact():
    # oracle: numpy's general inverse of the wheel matrix
    m = np.array(WHEEL_MATRIX)
    for e in np.eye(3):
        tw = forward_kinematics(WheelSpeeds(*e), KinematicParams(1.0))
        np.testing.assert_allclose(tw, np.linalg.solve(m, e), atol=1e-15)


def test_pure_rotation_gives_equal_wheels():
    w = inverse_kinematics(Twist2D(0, 0, -3.7), KinematicParams(0.12))
    assert w.v1 == pytest.approx(-0.444) and w.v1 == w.v2 == w.v3


@given(st.floats(-2, 2), st.floats(-2, 2))
def test_translation_wheel_sum(vx, vy):
    # the printed matrix's vy column sums to -1, so only vx cancels
    w = inverse_kinematics(Twist2D(vx, vy, 0.0))
    assert sum(w) == pytest.approx(-vy, abs=1e-12)


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-10, 10), st.floats(0.01, 1.0))
def test_kinematics_round_trip(vx, vy, om, R):
    p = KinematicParams(R)
    t = forward_kinematics(inverse_kinematics(Twist2D(vx, vy, om), p), p)
    assert close(t, (vx, vy, om), 1e-9)


def test_kinematic_params_reject_nonpositive():
    with pytest.raises(ValueError):
        KinematicParams(0.0)


@given(angles)
def test_wrap_angle_range(a):
    w = wrap_angle(a)
    assert -math.pi < w <= math.pi
    assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)


def test_wrap_angle_boundary():
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi


def test_compose_examples():
    p = Pose2D(1.0, 0.0, math.pi / 2)
    assert close(compose(p, Pose2D(1, 0, 0)), (1, 1, math.pi / 2))
    assert compose(IDENTITY, p) == p


@given(poses, poses)
def test_compose_properties(a, b):
    assert close(compose(a, invert(a)), IDENTITY, 1e-12)
    c = compose(a, b)
    assert -math.pi < c.theta <= math.pi
    assert close(relative(a, c), b.wrapped(), 1e-9)


def test_registry_lookup_and_errors():
    tf = TransformRegistry()
    tf.set("odom", "map", Pose2D(1.0, 2.0, math.pi / 2))
    tf.set("base_link", "odom", Pose2D(1.0, 0.0, 0.0))
    assert close(tf.lookup("map", "base_link"), (1.0, 3.0, math.pi / 2))
    back = tf.to_frame(Pose2D(0.5, 0.0, 0.0), "base_link", "map")
    assert close(back, (1.0, 3.5, math.pi / 2))
    assert close(tf.to_frame(back, "map", "base_link"), (0.5, 0.0, 0.0))
    with pytest.raises(UnknownFrameError):
        tf.lookup("map", "camera")
    with pytest.raises(UnknownFrameError):
        tf.set("camera", "gripper", IDENTITY)


@settings(max_examples=50)
@given(poses, poses, poses)
def test_registry_chain_matches_compose(a, b, c):
    tf = TransformRegistry()
    tf.set("odom", "map", a)
    tf.set("base_link", "odom", b)
    assert close(tf.to_frame(c, "base_link", "map"), compose(compose(a, b), c), 1e-9)
