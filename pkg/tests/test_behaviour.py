import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dotswarm.behaviour.attention import CarrierAttention
from dotswarm.behaviour.engine import (Action, Condition, MalformedTreeError, Selector, Sequence, Status,
                                       tick)
from dotswarm.behaviour.explore import ExploreParams, choose_explore_direction, p_negative_x
from dotswarm.behaviour.task import (Blackboard, Drive, GoTo, MapSighting, PickUp, Sighting, Stop,
                                     TaskParams, build_task_tree)
from dotswarm.geometry import Pose2D
from dotswarm.sensing import FiducialDetection
from dotswarm.world import Zone

S, F, R = Status.SUCCESS, Status.FAILURE, Status.RUNNING


class Counter:
    def __init__(self, results):
        self.results = list(results)
        self.calls = 0

    def __call__(self, bb):
        self.calls += 1
        return self.results[min(self.calls - 1, len(self.results) - 1)]


class BB:
    tick = 0


def test_sequence_semantics():
    a, b = Counter([S]), Counter([R, S])
    root = Sequence([Action(a), Action(b)])
    bb = BB()
    assert tick(root, bb) is R
    bb.tick += 1
    assert tick(root, bb) is S
    assert (a.calls, b.calls) == (2, 2)  # reactive: re-ticked from the root
    c = Counter([F])
    never = Counter([S])
    assert tick(Sequence([Action(c), Action(never)]), bb) is F and never.calls == 0


def test_selector_semantics():
    bb = BB()
    assert tick(Selector([Condition(lambda bb: False), Action(lambda bb: R)]), bb) is R
    assert tick(Selector([Condition(lambda bb: False)]), bb) is F
    later = Counter([F])
    assert tick(Selector([Condition(lambda bb: True), Action(later)]), bb) is S and later.calls == 0


def test_engine_errors():
    with pytest.raises(MalformedTreeError):
        Sequence([])
    with pytest.raises(TypeError):
        tick(Action(lambda bb: True), BB())


def test_entered_flag_tracks_running():
    seen = []

    class Leaf(Action):
        def update(self, bb, entered):
            seen.append(entered)
            return R

    leaf, bb = Leaf(lambda bb: R), BB()
    for t in range(3):
        bb.tick = t
        leaf.tick(bb)
    bb.tick = 5  # a skipped tick restarts the leaf
    leaf.tick(bb)
    assert seen == [True, False, False, True]


def _det(cid, x, y=0.0):
    return FiducialDetection(cid, "E", Pose2D(x, y, 0.0), 0.0)


def test_attention_locks_on_closest():
    att = CarrierAttention(lock_time=3.0)
    dets = [_det(1, 1.0), _det(2, 0.5)]
    assert [d.carrier_id for d in att.filter(dets, 0.0)] == [2]
    assert [d.carrier_id for d in att.filter([_det(1, 0.2), _det(2, 0.9)], 1.0)] == [2]
    assert [d.carrier_id for d in att.filter([_det(1, 0.2)], 3.5)] == [1]  # lock expired


def test_attention_prefer_blacklist_and_acquire():
    att = CarrierAttention()
    assert att.filter([_det(1, 0.3), _det(2, 1.0)], 0.0, prefer=2)[0].carrier_id == 2
    att.ignore(2, until=10.0)
    assert att.locked_id is None
    assert att.filter([_det(2, 0.3)], 5.0) == []
    assert att.filter([_det(2, 0.3)], 10.0)[0].carrier_id == 2
    fresh = CarrierAttention()
    assert fresh.filter([_det(3, 0.3)], 0.0, acquire=False) == [] and fresh.locked_id is None


def test_p_negative_x_narrow_closed_form():
    from scipy.stats import norm
    # central band plus the first wrapped image on each side
    band = 2 * norm.cdf(math.pi / 2) - 1 + 2 * (norm.cdf(2.5 * math.pi) - norm.cdf(1.5 * math.pi))
    assert p_negative_x(1.0) == pytest.approx(band, abs=1e-9)
    assert p_negative_x(1e-3) == pytest.approx(1.0)
    assert p_negative_x(100.0) == pytest.approx(0.5, abs=1e-3)


@pytest.mark.parametrize("in_search,sigma", [(True, 3.0), (False, 1.0)])
def test_p_negative_x_matches_sampling(in_search, sigma):
    rng = np.random.default_rng(11)
    h = np.array([choose_explore_direction(in_search, rng) for _ in range(40_000)])
    assert np.all((h > -math.pi) & (h <= math.pi))
    assert np.mean(np.cos(h) < 0) == pytest.approx(p_negative_x(sigma), abs=0.01)


def test_explore_params_validated():
    with pytest.raises(ValueError):
        ExploreParams(sigma_search=0.0)


@settings(max_examples=30)
@given(st.floats(-math.pi, math.pi), st.integers(0, 1000))
def test_custom_mean_is_wrapped(mu, seed):
    h = choose_explore_direction(False, np.random.default_rng(seed), mu=mu)
    assert -math.pi < h <= math.pi


def _bb(**kw):
    return Blackboard(**kw)


def test_tree_explores_when_nothing_seen():
    root = build_task_tree(TaskParams(), np.random.default_rng(0))
    bb = _bb(zone=Zone.SEARCH)
    assert tick(root, bb) is R
    assert isinstance(bb.motion, Drive) and bb.motion.speed == pytest.approx(0.5)


def test_tree_detection_stops_then_predocks():
    root = build_task_tree(TaskParams(), np.random.default_rng(0))
    bb = _bb(zone=Zone.SEARCH)
    tick(root, bb)
    bb.tick, bb.time = 1, 0.1
    bb.fiducial = Sighting(4, Pose2D(1.0, 0.0, 0.0), "W", 0.1)
    assert tick(root, bb) is R
    assert [e[1] for e in bb.events] == ["detected"]
    # robot at the origin is west of the carrier: predock 0.565 m out from the W face, facing +x
    assert isinstance(bb.motion, GoTo)
    assert tuple(bb.motion.pose) == pytest.approx((1.0 - 0.565, 0.0, 0.0), abs=1e-9)
    assert bb.focus_id == 4


def test_pickup_centres_then_raises():
    leaf = PickUp(TaskParams())
    bb = _bb(time=1.0)
    bb.markermap = MapSighting(Pose2D(0.1, 0.0, 0.0), Pose2D(0.1, 0.0, 0.0), 1.0)
    leaf.tick(bb)
    assert isinstance(bb.motion, GoTo) and bb.lifter_cmd is None
    bb.markermap = MapSighting(Pose2D(0.01, 0.0, 0.05), Pose2D(0.0, 0.0, 0.0), 1.0)
    bb.tick = 1
    assert leaf.tick(bb) is R
    assert isinstance(bb.motion, Stop) and bb.lifter_cmd == "raise" and bb.carry_yaw == 0.05


def test_pickup_fails_when_carrier_lost():
    leaf = PickUp(TaskParams())
    bb = _bb(time=0.0)
    bb.fiducial = Sighting(2, Pose2D(1.0, 0.0, 0.0), "W", 0.0)
    assert leaf.tick(bb) is R
    bb.tick, bb.time = 1, 2.0  # sighting is now stale
    assert leaf.tick(bb) is F
    assert bb.blacklist == [2] and bb.focus_id is None


def test_blackboard_stamps_writes():
    bb = _bb(time=2.5)
    bb.collision = 0.3
    assert bb.stamps["collision"] == 2.5
    assert bb.snapshot()["zone"] == "neither"
