"""The carrier-retrieval task: explore, pick up, take to the drop zone.

Leaves read conditioned senses from the :class:`Blackboard` and write
actuation intents back to it. They never touch the world or the bus.
The tree is reactive: it is re-ticked from the root every cycle. A stage
that has already finished answers SUCCESS while a later stage is in
progress, so the top-level sequence falls through to the active leaf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, NamedTuple

import numpy as np

from ..collision_map import CollisionGrid
from ..geometry import Pose2D, compose, relative, wrap_angle
from ..world import FACES, Zone
from .engine import BTNode, Sequence, Status
from .explore import ExploreParams, choose_explore_direction


# -- actuation intents -------------------------------------------------------


class Stop(NamedTuple):
    pass


class Drive(NamedTuple):
    """Constant-velocity motion along an odom-frame heading."""

    heading: float
    speed: float


class GoTo(NamedTuple):
    """Move to an odom-frame pose and stop there."""

    pose: Pose2D
    speed: float


# -- conditioned senses ------------------------------------------------------


class Sighting(NamedTuple):
    carrier_id: int
    carrier: Pose2D  # estimated carrier centre, odom frame
    face: str  # face most recently seen
    stamp: float  # emission time of the newest detection


class MapSighting(NamedTuple):
    offset: Pose2D  # carrier centre in base_link
    carrier: Pose2D  # carrier centre, odom frame
    stamp: float


class Blackboard:
    """Shared state between sense conditioning, the tree and the actuators.

    Every attribute write is stamped with the blackboard time.
    """

    def __init__(self, **kw):
        object.__setattr__(self, "stamps", {})
        defaults = dict(
            time=0.0, tick=0,
            odom_pose=Pose2D(), odom_speed=0.0, compass=None, zone=Zone.NEITHER,
            collision=0.0, grid=None, stalled=False, motion_done=False,
            fiducial=None, markermap=None,
            carrying=False, lifter="lowered", lift_result=None,
            motion=Stop(), lifter_cmd=None, focus_id=None, blacklist=[],
            delivering=False, carry_yaw=None, events=[],
        )
        defaults.update(kw)
        for k, v in defaults.items():
            setattr(self, k, v)

    def __setattr__(self, key: str, value: Any) -> None:
        object.__setattr__(self, key, value)
        self.stamps[key] = self.__dict__.get("time", 0.0)

    def event(self, name: str, detail: str = "") -> None:
        self.events.append((self.time, name, detail))

    def map_to_odom_yaw(self) -> float:
        """Rotation taking map headings into odom headings (compass minus odom yaw)."""
        if self.compass is None:
            return 0.0
        return wrap_angle(self.compass - self.odom_pose.theta)

    def snapshot(self) -> dict:
        keep = ("time", "tick", "odom_pose", "zone", "collision", "stalled", "fiducial", "markermap",
                "carrying", "lifter", "motion", "lifter_cmd", "delivering")
        out = {}
        for k in keep:
            v = getattr(self, k)
            out[k] = v.value if isinstance(v, Zone) else (v._asdict() if hasattr(v, "_asdict") else v)
        return out


# -- parameters ---------------------------------------------------------------


@dataclass(frozen=True)
class TaskParams:
    explore: ExploreParams = field(default_factory=ExploreParams)
    collision_threshold: float = 0.2
    lookahead: float = 0.7
    radius: float = 0.18
    carry_radius: float = 0.26
    direction_tries: int = 8
    fallback_speed: float = 0.1
    fallback_distance: float = 0.2
    stale: float = 1.0  # seconds before a fiducial or markermap counts as lost
    predock_standoff: float = 0.4  # predock distance from the face
    predock_reach: float = 0.1  # "close to predock"
    tray_half: float = 0.165
    approach_speed: float = 0.5
    dock_speed: float = 0.2
    centre_speed: float = 0.15
    centre_tolerance: float = 0.02
    settle_speed: float = 0.02
    pickup_timeout: float = 25.0
    blacklist_time: float = 12.0
    drop_dwell: float = 1.0
    exit_distance: float = 0.45
    exit_speed: float = 0.2
    exit_timeout: float = 5.0


def _unit(h: float) -> tuple[float, float]:
    return math.cos(h), math.sin(h)


# -- ballistic walking shared by explore and take-to-drop --------------------


class _Walker:
    """Pick collision-free headings; fall back to the least-worst direction."""

    def __init__(self, params: TaskParams, rng: np.random.Generator):
        self.p = params
        self.rng = rng
        self.heading: float | None = None  # odom frame
        self.speed = 0.0
        self.fallback_from: Pose2D | None = None

    def blocked(self, bb: Blackboard, heading: float, speed: float, radius: float) -> float:
        grid: CollisionGrid | None = bb.grid
        if grid is None:
            return 0.0
        ux, uy = _unit(heading)
        return grid.predict_collision((ux * speed, uy * speed), self.p.lookahead, radius)

    def choose(self, bb: Blackboard, mu: float, speed: float, radius: float) -> None:
        in_search = bb.zone is Zone.SEARCH
        rot = bb.map_to_odom_yaw()
        for _ in range(self.p.direction_tries):
            h_map = choose_explore_direction(in_search, self.rng, self.p.explore, mu)
            h = wrap_angle(h_map - rot)
            if self.blocked(bb, h, speed, radius) <= self.p.collision_threshold:
                self.heading, self.speed, self.fallback_from = h, speed, None
                return
        if bb.grid is not None:
            h = bb.grid.least_worst_direction(16, reach=0.3, radius=self.p.radius)
        else:
            h = wrap_angle(h_map - rot)
        self.heading, self.speed, self.fallback_from = wrap_angle(h), self.p.fallback_speed, bb.odom_pose
        bb.event("fallback", f"least-worst heading {wrap_angle(h):.3f}")

    def step(self, bb: Blackboard, entered: bool, mu: float, speed: float, radius: float) -> None:
        redraw = entered or self.heading is None or bb.stalled
        if not redraw and self.fallback_from is not None:
            moved = math.hypot(bb.odom_pose.x - self.fallback_from.x, bb.odom_pose.y - self.fallback_from.y)
            redraw = moved >= self.p.fallback_distance
        if not redraw and self.fallback_from is None:
            redraw = bb.collision > self.p.collision_threshold
        if redraw:
            self.choose(bb, mu, speed, radius)
        bb.motion = Drive(self.heading, self.speed)


# -- leaves -------------------------------------------------------------------


class Explore(BTNode):
    def __init__(self, params: TaskParams, rng: np.random.Generator):
        super().__init__("explore")
        self.p = params
        self.walk = _Walker(params, rng)

    def update(self, bb: Blackboard, entered: bool) -> Status:
        if bb.carrying or bb.delivering:
            return Status.SUCCESS
        if bb.fiducial is not None or bb.markermap is not None:
            if self.last_status is Status.RUNNING:
                bb.motion = Stop()
                what = bb.fiducial.carrier_id if bb.fiducial is not None else "markermap"
                bb.event("detected", f"carrier {what}")
            return Status.SUCCESS
        bb.focus_id = None  # a pickup target that vanished is no longer pursued
        self.walk.step(bb, entered, self.p.explore.mu, self.p.explore.speed_explore, self.p.radius)
        return Status.RUNNING


class PickUp(BTNode):
    """Predock, then dock under the carrier, then centre on the markermap and lift."""

    def __init__(self, params: TaskParams):
        super().__init__("pick_up")
        self.p = params
        self.reset(0.0)

    def reset(self, now: float) -> None:
        self.phase = "predock"
        self.started = now
        self.target_id: int | None = None
        self.face: str | None = None
        self.lift_sent = False

    def _fail(self, bb: Blackboard, why: str) -> Status:
        if self.target_id is not None:
            bb.blacklist = bb.blacklist + [self.target_id]
        bb.event("pickup_failed", why)
        bb.motion = Stop()
        bb.focus_id = None
        return Status.FAILURE

    def update(self, bb: Blackboard, entered: bool) -> Status:
        p = self.p
        if bb.carrying or bb.delivering:
            return Status.SUCCESS
        if entered:
            self.reset(bb.time)
        if bb.time - self.started > p.pickup_timeout:
            return self._fail(bb, "timeout")
        mm = bb.markermap if bb.markermap is not None and bb.time - bb.markermap.stamp <= p.stale else None
        fid = bb.fiducial if bb.fiducial is not None and bb.time - bb.fiducial.stamp <= p.stale else None
        if fid is not None and self.target_id is None:
            self.target_id = fid.carrier_id
        if fid is not None:
            bb.focus_id = fid.carrier_id
        if mm is not None:
            self.phase = "centre"
            off = math.hypot(mm.offset.x, mm.offset.y)
            if self.lift_sent and bb.lift_result == "misaligned":
                self.lift_sent = False
            if off <= p.centre_tolerance and bb.odom_speed <= p.settle_speed:
                bb.motion = Stop()
                if not self.lift_sent and bb.lifter == "lowered":
                    bb.lifter_cmd = "raise"
                    bb.lift_result = None
                    self.lift_sent = True
                    bb.carry_yaw = mm.offset.theta
                return Status.RUNNING
            target = Pose2D(mm.carrier.x, mm.carrier.y, bb.odom_pose.theta)
            bb.motion = GoTo(target, p.centre_speed)
            return Status.RUNNING
        if self.lift_sent:
            return Status.RUNNING  # lifting in progress blocks the cameras
        if fid is None:
            return self._fail(bb, "lost carrier")
        c = fid.carrier
        if self.face is None or self.phase == "predock":
            self.face = self._best_face(c, bb.odom_pose)
        n = c.theta + FACES[self.face]
        nx, ny = _unit(n)
        facing = wrap_angle(n + math.pi)
        stand = p.tray_half + p.predock_standoff
        predock = Pose2D(c.x + stand * nx, c.y + stand * ny, facing)
        if self.phase == "predock":
            near = math.hypot(bb.odom_pose.x - predock.x, bb.odom_pose.y - predock.y) <= p.predock_reach
            if near and abs(wrap_angle(bb.odom_pose.theta - facing)) < 0.2:
                self.phase = "dock"
        if self.phase == "dock":
            bb.motion = GoTo(Pose2D(c.x, c.y, facing), p.dock_speed)
        else:
            bb.motion = GoTo(predock, p.approach_speed)
        return Status.RUNNING

    @staticmethod
    def _best_face(carrier: Pose2D, robot: Pose2D) -> str:
        bearing = math.atan2(robot.y - carrier.y, robot.x - carrier.x)
        return min(FACES, key=lambda f: abs(wrap_angle(carrier.theta + FACES[f] - bearing)))


class TakeToDrop(BTNode):
    """Biased walk toward the drop zone, set the carrier down, back out from under it."""

    def __init__(self, params: TaskParams, rng: np.random.Generator):
        super().__init__("take_to_drop")
        self.p = params
        self.walk = _Walker(params, rng)
        self.phase = "carry"
        self.zone_time = 0.0
        self.t_last = 0.0
        self.exit_goal: Pose2D | None = None
        self.exit_start = 0.0

    def update(self, bb: Blackboard, entered: bool) -> Status:
        p = self.p
        if entered and not bb.delivering:
            self.phase, self.zone_time, self.t_last = "carry", 0.0, bb.time
        dt = bb.time - self.t_last
        self.t_last = bb.time
        if self.phase == "carry":
            if not bb.carrying:
                bb.event("carrier_lost", "")
                return Status.FAILURE
            if bb.lifter != "raised":
                bb.motion = Stop()
                return Status.RUNNING
            if bb.zone is Zone.DROP:
                self.zone_time += dt
            else:
                self.zone_time = 0.0
            if self.zone_time >= p.drop_dwell:
                bb.motion = Stop()
                if bb.odom_speed <= p.settle_speed:
                    bb.lifter_cmd = "lower"
                    bb.delivering = True
                    self.phase = "lowering"
                return Status.RUNNING
            mu = wrap_angle(p.explore.mu + math.pi)  # mirrored: toward +x
            self.walk.step(bb, entered or self.walk.heading is None, mu, p.explore.speed_carry, p.carry_radius)
            return Status.RUNNING
        if self.phase == "lowering":
            bb.motion = Stop()
            if bb.lifter == "lowered" and not bb.carrying:
                self.phase = "exit"
                self.exit_goal = self._exit_goal(bb)
                self.exit_start = bb.time
            return Status.RUNNING
        # exit: slide out between the legs, no collision checks
        g = self.exit_goal
        done = math.hypot(bb.odom_pose.x - g.x, bb.odom_pose.y - g.y) < 0.03 or bb.motion_done
        if done or bb.time - self.exit_start > p.exit_timeout:
            bb.motion = Stop()
            bb.delivering = False
            bb.carry_yaw = None
            self.phase = "carry"
            self.walk.heading = None
            bb.event("delivered", "")
            return Status.SUCCESS
        bb.motion = GoTo(g, p.exit_speed)
        return Status.RUNNING

    def _exit_goal(self, bb: Blackboard) -> Pose2D:
        """Point past the tray edge along the carrier axis that heads most toward -x."""
        rel = bb.carry_yaw if bb.carry_yaw is not None else 0.0
        rot = bb.map_to_odom_yaw()
        want = wrap_angle(self.p.explore.mu - rot)  # -x in odom
        axes = [wrap_angle(bb.odom_pose.theta + rel + k * math.pi / 2) for k in range(4)]
        h = min(axes, key=lambda a: abs(wrap_angle(a - want)))
        ux, uy = _unit(h)
        d = self.p.exit_distance
        return Pose2D(bb.odom_pose.x + d * ux, bb.odom_pose.y + d * uy, bb.odom_pose.theta)


def build_task_tree(params: TaskParams = TaskParams(), rng: np.random.Generator | None = None) -> BTNode:
    """Top-level sequence [explore, pick_up, take_to_drop]."""
    rng = rng if rng is not None else np.random.default_rng(0)
    return Sequence([Explore(params, rng), PickUp(params), TakeToDrop(params, rng)], name="task")
