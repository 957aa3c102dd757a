import math

import numpy as np
import pytest
from conftest import make_world
from hypothesis import given, settings
from hypothesis import strategies as st

from dotswarm.geometry import Pose2D
from dotswarm.sensing import (BEAM_BEARINGS, N_BEAMS, NO_RETURN, CameraParams, IrtofNoiseModel, LatencyQueue,
                              OdometryNoise, compass, delayed, detect_markermap, detect_side_fiducials,
                              integrate_odometry, markermap_visible, odometry_from, sample_irtof,
                              sample_odometry, true_ranges, zone_sense)
from dotswarm.world import RAISED, Zone

RADIUS = 0.125


def test_beam_layout():
    assert len(BEAM_BEARINGS) == N_BEAMS == 16
    assert np.allclose(np.diff(BEAM_BEARINGS), math.radians(22.5))


def test_wall_distance_is_exact():
    # robot rim 1.0 m from the east wall at x = 2.5
    w = make_world([(2.5 - 1.0 - RADIUS, 0.0, 0.0)])
    d = true_ranges(w)[0]
    assert d[0] == pytest.approx(1.0, abs=1e-12)
    assert d[8] > IrtofNoiseModel().max_range  # west wall 3.75 m away is out of range


def test_open_space_gives_no_returns(rng):
    w = make_world([(0.0, 0.0, 0.0)])
    w.arena = type(w.arena)(width=20.0, height=20.0)
    scan = sample_irtof(w, 0, rng)
    assert scan.ranges == (NO_RETURN,) * 16


def test_robots_and_legs_block_beams():
    w = make_world([(0.0, 0.0, 0.0), (0.6, 0.0, 0.0)], [(-0.6, 0.0, 0.0)])
    d = true_ranges(w)[0]
    assert d[0] == pytest.approx(0.6 - 2 * RADIUS, abs=1e-12)
    assert d[8] > 0.5  # beam at pi passes between legs 0.31 m apart


@pytest.mark.parametrize("d", [0.5, 1.0, 2.0, 3.0])
def test_irtof_mean_error(d, rng):
    m = IrtofNoiseModel()
    r = m.corrupt(np.full(10_000, d), rng)
    bound = 0.012 if d <= 2.7 else 0.030
    assert abs(r.mean() - d) <= bound


def test_irtof_multipath_near(rng):
    m = IrtofNoiseModel()
    r = m.corrupt(np.full(10_000, 0.15), rng)
    frac2 = np.mean(np.abs(r - 0.30) <= 3 * m.sigma_near)
    assert 0.27 <= frac2 <= 0.33


def test_irtof_probabilities_validated():
    with pytest.raises(ValueError):
        IrtofNoiseModel(p_slope2=0.8, p_slope3=0.3)


def test_irtof_same_seed_same_scan():
    w = make_world([(0.0, 0.0, 0.3)])
    a = sample_irtof(w, 0, np.random.default_rng(4))
    b = sample_irtof(w, 0, np.random.default_rng(4))
    assert a == b


def test_fiducial_detection_geometry(rng):
    # carrier east face 0.5 m from the robot and facing it
    w = make_world([(0.0, 0.0, 0.0)], [(0.5 + 0.165, 0.0, math.pi)])
    dets = detect_side_fiducials(w, 0, rng)
    assert [d.face for d in dets] == ["E"]
    p = dets[0].pose_in_base_link
    assert math.hypot(p.x - 0.5, p.y) < 0.05
    far = make_world([(0.0, 0.0, 0.0)], [(2.0, 0.0, math.pi)])
    assert detect_side_fiducials(far, 0, rng) == []


def test_fiducial_view_angle_cutoff(rng):
    # robot almost along the face plane: normal nearly perpendicular to sight line
    w = make_world([(0.0, 0.0, 0.0)], [(0.4, 0.5, math.pi / 2)])
    assert all(d.face != "E" for d in detect_side_fiducials(w, 0, rng))
    assert CameraParams().max_view_angle == pytest.approx(math.radians(60))


def test_fiducial_occluded_by_robot(rng):
    w = make_world([(0.0, 0.0, 0.0), (0.4, 0.0, 0.0)], [(0.8, 0.0, math.pi)])
    assert detect_side_fiducials(w, 0, rng) == []


def test_markermap_under_centre(rng):
    w = make_world([(1.0, 1.0, 0.3)], [(1.0, 1.0, 0.0)])
    p = detect_markermap(w, 0, rng)
    assert p is not None and math.hypot(p.x, p.y) <= 3 * 0.005 * math.sqrt(2)
    w.robots[0].lifter = RAISED
    assert detect_markermap(w, 0, rng) is None


def test_markermap_misses():
    assert not markermap_visible(1.0, 0.0, 0.165, 0.02, 0.04)
    assert not markermap_visible(0.14, 0.14, 0.165, 0.02, 0.04)  # leg shadow corner
    assert markermap_visible(0.14, 0.0, 0.165, 0.02, 0.04)


def test_markermap_coverage(rng):
    w = make_world([(0.0, 0.0, 0.0)], [(0.0, 0.0, 0.4)])
    g, cam = w.geometry, CameraParams()
    hits = 0
    for _ in range(2000):
        lx, ly = rng.uniform(-g.half, g.half, 2)
        if not markermap_visible(lx, ly, g.half, cam.markermap_inset, cam.leg_shadow):
            continue
        c, s = math.cos(0.4), math.sin(0.4)
        w.robots[0].pose = Pose2D(c * lx - s * ly, s * lx + c * ly, 0.0)
        assert detect_markermap(w, 0, rng) is not None
        hits += 1
    assert hits > 1000


def test_latency_mean_and_order(rng):
    q = LatencyQueue(0.0785, 0.0115, rng)
    dues = [q.push(i, i * 0.2) for i in range(10_000)]
    got = q.delayed_with_times(3000.0)
    assert [p for _, _, p in got] == list(range(10_000))
    assert all(b >= a for a, b in zip(dues, dues[1:]))
    delays = np.array([due - em for em, due, _ in got])
    assert abs(delays.mean() - 0.0785) <= 0.002


def test_latency_zero_and_never_early():
    q = LatencyQueue()
    q.push("a", 1.0)
    assert delayed(q, 1.0) == ["a"]
    q2 = LatencyQueue(0.05, 0.0)
    q2.push("b", 0.0)
    assert delayed(q2, 0.049) == [] and delayed(q2, 0.05) == ["b"]


def test_latency_rejects_negative():
    with pytest.raises(ValueError):
        LatencyQueue(-0.1)


def test_odometry_stationary_is_exact(rng):
    d = odometry_from(Pose2D(1, 2, 3), Pose2D(1, 2, 3), 0.01, rng)
    assert d.d_pose == pytest.approx((0.0, 0.0, 0.0), abs=1e-12)
    with pytest.raises(ValueError):
        odometry_from(Pose2D(), Pose2D(), 0.0, rng)


def test_odometry_straight_line_statistics(rng):
    xs = np.array([odometry_from(Pose2D(), Pose2D(0.5, 0, 0), 1.0, rng).d_pose.x for _ in range(1000)])
    assert abs(xs.mean() - 0.5) < 3 * 0.01 / math.sqrt(1000)
    assert xs.std() == pytest.approx(0.01, rel=0.1)
    th = np.array([odometry_from(Pose2D(), Pose2D(0, 0, 3.0), 1.0, rng).d_pose.theta for _ in range(1000)])
    assert abs(th.mean() - 3.0) < 0.01


def test_sample_odometry_tracks_reference(rng):
    w = make_world([(0.0, 0.0, 0.0)])
    w.robots[0].pose = Pose2D(0.01, 0.0, 0.0)
    d = sample_odometry(w, 0, 0.01, rng, OdometryNoise(0.0, 0.0))
    assert d.d_pose == pytest.approx((0.01, 0.0, 0.0))
    assert integrate_odometry(Pose2D(), d) == pytest.approx((0.01, 0.0, 0.0))
    assert sample_odometry(w, 0, 0.01, rng).d_pose == (0.0, 0.0, 0.0)


@pytest.mark.parametrize("x,zone", [(-0.5, Zone.SEARCH), (1.5, Zone.DROP), (0.5, Zone.NEITHER)])
def test_zone_sense(x, zone):
    assert zone_sense(make_world([(x, 0.0, 0.0)]), 0) is zone


@settings(max_examples=20)
@given(st.floats(-3.1, 3.1))
def test_compass_noise(theta):
    w = make_world([(0.0, 0.0, theta)])
    r = np.random.default_rng(1)
    errs = [math.remainder(compass(w, 0, r) - theta, 2 * math.pi) for _ in range(200)]
    assert max(map(abs, errs)) < math.radians(2.0) * 5
