"""On-robot controller: bus in, bus out.

Runs three loops at the rates the harness drives it with:

* ``control_step`` (100 Hz): integrates odometry and plays the active trajectory
  as a position-corrected velocity command.
* ``sense_step`` (50 Hz): conditions camera and range data into the blackboard
  and the collision map.
* ``bt_tick`` (10 Hz): ticks the task tree and turns its intents into trajectories.
"""

from __future__ import annotations

import bisect
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .behaviour.attention import CarrierAttention
from .behaviour.engine import Status
from .behaviour.task import Blackboard, Drive, GoTo, MapSighting, Sighting, Stop, TaskParams, build_task_tree
from .bus import Bus, robot_topic
from .collision_map import CollisionGrid
from .geometry import Pose2D, Twist2D, compose, rotate, wrap_angle
from .rng import RngStreams
from .sensing import BEAM_BEARINGS, N_BEAMS
from .trajectory import (MotionLimits, MotionSetpoint, Trajectory, Waypoint, cancel, plan, sample)
from .world import FACES, Zone


@dataclass(frozen=True)
class ControllerParams:
    task: TaskParams = field(default_factory=TaskParams)
    limits: MotionLimits = field(default_factory=MotionLimits)
    robot_radius: float = 0.125
    position_gain: float = 3.0  # 1/s, trajectory tracking
    stall_error: float = 0.12  # tracking error that counts as blocked
    drive_horizon: float = 4.0  # seconds of straight motion planned per Drive
    sighting_window: float = 1.0
    attention_time: float = 3.0
    retarget_distance: float = 0.01
    history: float = 1.0
    carried_footprint: float = 0.24  # returns closer than this are our own legs while carrying


class RobotController:
    def __init__(self, rid: int, bus: Bus, streams: RngStreams, params: ControllerParams = ControllerParams(),
                 grid: CollisionGrid | None = None):
        self.id, self.bus, self.p = rid, bus, params
        sub = lambda name: bus.subscribe(robot_topic(rid, name), rid)
        self.subs = {n: sub(n) for n in ("odom", "range_scan", "fiducials", "markermap", "compass",
                                          "zone", "lifter_state")}
        self.tree = build_task_tree(params.task, streams.get(rid, "behaviour"))
        self.bb = Blackboard(grid=grid if grid is not None else CollisionGrid())
        self.attention = CarrierAttention(params.attention_time)
        self.pose = Pose2D()  # odom frame; odom origin is the start pose
        self.speed = 0.0
        self._hist_t: deque[float] = deque()
        self._hist_p: deque[Pose2D] = deque()
        self._sightings: dict[int, deque] = {}
        self.traj: Trajectory = plan(MotionSetpoint(self.pose), [])
        self.t0 = 0.0
        self.intent = Stop()
        self.stalled = False
        self.events: list[tuple[float, str, str]] = []
        self._last_zone = Zone.NEITHER
        self._was_carrying = False

    # -- 100 Hz -------------------------------------------------------------
    def control_step(self, now: float) -> None:
        for d in self.subs["odom"].poll(now):
            prev = self.pose
            self.pose = compose(self.pose, d.d_pose)
            self.speed = math.hypot(self.pose.x - prev.x, self.pose.y - prev.y) / d.dt
            self._hist_t.append(now)
            self._hist_p.append(self.pose)
        while self._hist_t and self._hist_t[0] < now - self.p.history:
            self._hist_t.popleft()
            self._hist_p.popleft()
        sp = sample(self.traj, now - self.t0)
        err = math.hypot(sp.position.x - self.pose.x, sp.position.y - self.pose.y)
        if err > self.p.stall_error:
            # blocked: re-anchor the plan at the measured pose
            self.stalled = True
            self._replan(now, MotionSetpoint(self.pose), force=True)
            sp = sample(self.traj, now - self.t0)
        k = self.p.position_gain
        vx = sp.velocity.vx + k * (sp.position.x - self.pose.x)
        vy = sp.velocity.vy + k * (sp.position.y - self.pose.y)
        om = sp.velocity.omega + k * wrap_angle(sp.position.theta - self.pose.theta)
        bx, by = rotate(vx, vy, -self.pose.theta)
        self.bus.publish(robot_topic(self.id, "cmd_vel"), Twist2D(bx, by, om), now, publisher=f"robot_{self.id}")

    def pose_at(self, t: float) -> Pose2D:
        """Odom pose at time ``t`` from the recent history (nearest earlier sample)."""
        if not self._hist_t:
            return self.pose
        i = bisect.bisect_right(self._hist_t, t) - 1
        return self._hist_p[max(i, 0)]

    # -- 50 Hz --------------------------------------------------------------
    def sense_step(self, now: float, dt: float) -> None:
        bb = self.bb
        for z in self.subs["zone"].poll(now):
            self._last_zone = z
        for c in self.subs["compass"].poll(now):
            bb.compass = c
        for ls in self.subs["lifter_state"].poll(now):
            bb.lifter = ls.state
            bb.carrying = ls.carrying
            if ls.result is not None and ls.result != bb.lift_result:
                bb.lift_result = ls.result
        if bb.carrying and not self._was_carrying:
            # the carried legs now sit next to the sensors; start a fresh map
            bb.grid.cells[:] = 0.0
            bb.focus_id = None
            self._sightings.clear()
            self.attention.release()
        self._was_carrying = bb.carrying
        bb.zone = self._last_zone
        grid = bb.grid
        grid.recenter(self.pose.x, self.pose.y)
        pts = []
        for scan in self.subs["range_scan"].poll(now):
            pts.extend(self._scan_points(scan))
        grid.step(pts, dt)
        self._condition_fiducials(now)
        self._condition_markermap(now)

    def _shadowed(self) -> set[int]:
        rel = self.bb.carry_yaw if self.bb.carry_yaw is not None else 0.0
        out = set()
        for k in range(4):
            a = rel + math.pi / 4 + k * math.pi / 2
            out.add(int(round(a / (2 * math.pi / N_BEAMS))) % N_BEAMS)
        return out

    def _scan_points(self, scan) -> list[tuple[float, float]]:
        p = self.pose_at(scan.timestamp)
        skip = self._shadowed() if self.bb.carrying else set()
        out = []
        r0 = self.p.robot_radius
        for k, (d, b) in enumerate(zip(scan.ranges, BEAM_BEARINGS)):
            if not math.isfinite(d) or k in skip:
                continue
            if self.bb.carrying and r0 + d < self.p.carried_footprint:
                continue
            a = p.theta + b
            out.append((p.x + (r0 + d) * math.cos(a), p.y + (r0 + d) * math.sin(a)))
        return out

    def _condition_fiducials(self, now: float) -> None:
        bb = self.bb
        acquire = self._last_zone is Zone.SEARCH and not bb.carrying and not bb.delivering
        for _ in range(len(bb.blacklist)):
            self.attention.ignore(bb.blacklist.pop(), now + self.p.task.blacklist_time)
        half = self.p.task.tray_half
        for dets in self.subs["fiducials"].poll(now):
            kept = self.attention.filter(dets, now, acquire or bb.focus_id is not None, prefer=bb.focus_id)
            for d in kept:
                at = self.pose_at(d.timestamp)
                marker = compose(at, d.pose_in_base_link)
                carrier = compose(marker, Pose2D(-half, 0.0, -FACES[d.face]))
                self._sightings.setdefault(d.carrier_id, deque()).append((d.timestamp, carrier, d.face))
        locked = self.attention.locked_id
        best = None
        for cid, buf in self._sightings.items():
            while buf and buf[0][0] < now - self.p.sighting_window:
                buf.popleft()
            if cid == locked and buf:
                best = cid
        if best is None:
            if bb.fiducial is not None and now - bb.fiducial.stamp > self.p.task.stale:
                bb.fiducial = None
            return
        buf = self._sightings[best]
        xs = [c.x for _, c, _ in buf]
        ys = [c.y for _, c, _ in buf]
        # carrier yaw is only meaningful modulo a quarter turn
        s = sum(math.sin(4 * c.theta) for _, c, _ in buf)
        co = sum(math.cos(4 * c.theta) for _, c, _ in buf)
        yaw = math.atan2(s, co) / 4
        bb.fiducial = Sighting(best, Pose2D(sum(xs) / len(xs), sum(ys) / len(ys), yaw), buf[-1][2], buf[-1][0])

    def _condition_markermap(self, now: float) -> None:
        bb = self.bb
        accept = (self._last_zone is Zone.SEARCH or bb.focus_id is not None) and not bb.delivering
        for m in self.subs["markermap"].poll(now):
            if m.pose is None or not accept or bb.carrying:
                continue
            at = self.pose_at(m.timestamp)
            bb.markermap = MapSighting(m.pose, compose(at, m.pose), m.timestamp)
        if bb.markermap is not None and (now - bb.markermap.stamp > self.p.task.stale or bb.carrying):
            bb.markermap = None

    # -- 10 Hz --------------------------------------------------------------
    def bt_tick(self, now: float) -> Status:
        bb = self.bb
        bb.time = now
        bb.tick += 1
        bb.odom_pose = self.pose
        bb.odom_speed = self.speed
        bb.stalled = self.stalled
        self.stalled = False
        bb.motion_done = self.traj.is_complete(now - self.t0)
        bb.collision = self._collision_ahead()
        n_ev = len(bb.events)
        st = self.tree.tick(bb)
        self.events.extend(bb.events[n_ev:])
        del bb.events[:]
        if bb.lifter_cmd is not None:
            self.bus.publish(robot_topic(self.id, "lifter_cmd"), bb.lifter_cmd, now, publisher=f"robot_{self.id}")
            bb.lifter_cmd = None
        self._execute(bb.motion, now)
        if st is Status.FAILURE:
            self.attention.release()
        return st

    def _collision_ahead(self) -> float:
        sp = sample(self.traj, self.bb.time - self.t0)
        r = self.p.task.carry_radius if self.bb.carrying else self.p.task.radius
        if isinstance(self.intent, Drive):
            ux, uy = math.cos(self.intent.heading), math.sin(self.intent.heading)
            v = (ux * self.intent.speed, uy * self.intent.speed)
        else:
            v = (sp.velocity.vx, sp.velocity.vy)
        return self.bb.grid.predict_collision(v, self.p.task.lookahead, r)

    # -- motion ---------------------------------------------------------------
    def _state(self, now: float) -> MotionSetpoint:
        return sample(self.traj, now - self.t0)

    def _limits(self, speed: float, start: MotionSetpoint) -> MotionLimits:
        # never ask for a cap below the speed we already have
        return self.p.limits.scaled(max(speed, min(start.velocity.speed * (1 + 1e-9), self.p.limits.v_max)))

    def _replan(self, now: float, start: MotionSetpoint, force: bool = False) -> None:
        it = self.intent
        if isinstance(it, Stop):
            if force:
                self.traj = plan(MotionSetpoint(start.position), [])
            else:
                self.traj = cancel(self.traj, now - self.t0)
        elif isinstance(it, Drive):
            ux, uy = math.cos(it.heading), math.sin(it.heading)
            L = it.speed * self.p.drive_horizon
            p = start.position
            wp = Waypoint(Pose2D(p.x + ux * L, p.y + uy * L, p.theta), Twist2D(ux * it.speed, uy * it.speed, 0.0))
            self.traj = plan(start, [wp], self._limits(it.speed, start))
        else:
            self.traj = plan(start, [Waypoint(it.pose)], self._limits(it.speed, start))
        self.t0 = now

    def _execute(self, intent, now: float) -> None:
        old = self.intent
        t = now - self.t0
        if isinstance(intent, Stop):
            if not isinstance(old, Stop):
                self.intent = intent
                self.traj = cancel(self.traj, t)
                self.t0 = now
            return
        if isinstance(intent, Drive):
            same = isinstance(old, Drive) and old == intent
            if same and self.traj.duration - t > 1.0:
                return
            self.intent = intent
            self._replan(now, self._state(now))
            return
        if isinstance(intent, GoTo):
            if isinstance(old, GoTo) and old.speed == intent.speed:
                a, b = old.pose, intent.pose
                moved = math.hypot(a.x - b.x, a.y - b.y) > self.p.retarget_distance or \
                    abs(wrap_angle(a.theta - b.theta)) > 0.03
                if not moved:
                    return
            self.intent = intent
            self._replan(now, self._state(now))
            return
        raise TypeError(f"unknown motion intent {intent!r}")
