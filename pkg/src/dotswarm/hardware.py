"""Simulated robot hardware behind the topic bus.

Publishes every sense on ``robot_<k>/...`` topics and consumes velocity and
lifter commands. Controllers only ever see the bus, never the world.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bus import RELIABLE, Bus, robot_topic
from .geometry import Twist2D
from .rng import RngStreams
from .sensing import (CameraParams, IrtofNoiseModel, LatencyQueue, OdometryNoise, RangeScan, compass,
                      detect_markermap, detect_side_fiducials, sample_odometry, true_ranges, zone_sense)
from .world import LiftResult, WorldState, attempt_lift, lower

# topic name -> payload type tag
SENSE_TOPICS = {
    "range_scan": "RangeScan",
    "fiducials": "list[FiducialDetection]",
    "markermap": "MarkermapReading",
    "odom": "OdometryDelta",
    "compass": "float",
    "zone": "Zone",
    "lifter_state": "LifterState",
}
COMMAND_TOPICS = {"cmd_vel": "Twist2D", "lifter_cmd": "str"}


@dataclass(frozen=True)
class SensorConfig:
    irtof: IrtofNoiseModel = field(default_factory=IrtofNoiseModel)
    camera: CameraParams = field(default_factory=CameraParams)
    odometry: OdometryNoise = field(default_factory=OdometryNoise)
    compass_sigma: float = float(np.radians(2.0))


@dataclass(frozen=True)
class MarkermapReading:
    pose: object  # Pose2D of the carrier centre in base_link, or None
    timestamp: float


@dataclass(frozen=True)
class LifterState:
    state: str
    carrying: bool
    result: str | None  # outcome of the most recent lift attempt
    timestamp: float


class SimHardware:
    """All robots' sensor and actuator drivers for one world."""

    def __init__(self, world: WorldState, bus: Bus, streams: RngStreams, cfg: SensorConfig = SensorConfig()):
        self.world, self.bus, self.cfg = world, bus, cfg
        self.n = len(world.robots)
        self.events: list[tuple[float, int, str, str]] = []
        self._rng = {}
        self._queues = {}
        self._cmd = []
        self._lift = []
        self._last_result: list[str | None] = [None] * self.n
        cam = cfg.camera
        scan_period = 1.0 / cfg.irtof.update_rate
        for i in range(self.n):
            for name, tag in SENSE_TOPICS.items():
                bus.register(robot_topic(i, name), tag, RELIABLE)
            for name, tag in COMMAND_TOPICS.items():
                bus.register(robot_topic(i, name), tag, RELIABLE)
            self._cmd.append(bus.subscribe(robot_topic(i, "cmd_vel")))
            self._lift.append(bus.subscribe(robot_topic(i, "lifter_cmd")))
            for purpose in ("irtof", "fiducial", "markermap", "odometry", "compass"):
                self._rng[i, purpose] = streams.get(i, purpose)
            self._queues[i, "range_scan"] = LatencyQueue(scan_period, 0.0)
            self._queues[i, "fiducials"] = LatencyQueue(cam.delay_mean, cam.delay_sigma, streams.get(i, "fiducial_delay"))
            self._queues[i, "markermap"] = LatencyQueue(cam.delay_mean, cam.delay_sigma, streams.get(i, "markermap_delay"))

    def _pub(self, i: int, name: str, payload, now: float) -> None:
        self.bus.publish(robot_topic(i, name), payload, now, publisher="hw")

    def _lifter_state(self, i: int) -> LifterState:
        r = self.world.robots[i]
        return LifterState(r.lifter, r.carrying is not None, self._last_result[i], self.world.time)

    def apply_commands(self) -> None:
        """Latch the newest velocity command and act on lifter requests."""
        now = self.world.time
        for i in range(self.n):
            cmds = self._cmd[i].poll(now)
            if cmds:
                self.world.robots[i].command = Twist2D(*cmds[-1])
            for req in self._lift[i].poll(now):
                self._lifter(i, req, now)

    def _lifter(self, i: int, req: str, now: float) -> None:
        w = self.world
        if req == "raise":
            res, cid = attempt_lift(w, i)
            self._last_result[i] = res.value
            if res is not LiftResult.BUSY:
                self.events.append((now, i, res.value, "" if cid is None else f"carrier {cid}"))
        elif req == "lower":
            cid = lower(w, i)
            if cid is not None:
                c = w.carriers[cid]
                self.events.append((now, i, "dropped", f"carrier {cid} at {c.pose.x:.3f} {c.pose.y:.3f}"))
        else:
            raise ValueError(f"unknown lifter command {req!r}")
        self._pub(i, "lifter_state", self._lifter_state(i), now)

    def after_physics(self, dt: float) -> None:
        """Odometry at the physics rate, then release any camera frames now due."""
        now = self.world.time
        for i in range(self.n):
            self._pub(i, "odom", sample_odometry(self.world, i, dt, self._rng[i, "odometry"], self.cfg.odometry), now)
            for name in ("range_scan", "fiducials", "markermap"):
                for p in self._queues[i, name].delayed(now):
                    self._pub(i, name, p, now)

    def sample_sensors(self) -> None:
        w = self.world
        now = w.time
        ranges = true_ranges(w)
        for i in range(self.n):
            noisy = self.cfg.irtof.corrupt(ranges[i], self._rng[i, "irtof"])
            self._queues[i, "range_scan"].push(RangeScan(now, tuple(noisy.tolist())), now)
            dets = detect_side_fiducials(w, i, self._rng[i, "fiducial"], self.cfg.camera)
            self._queues[i, "fiducials"].push(dets, now)
            mm = detect_markermap(w, i, self._rng[i, "markermap"], self.cfg.camera)
            self._queues[i, "markermap"].push(MarkermapReading(mm, now), now)
            self._pub(i, "compass", compass(w, i, self._rng[i, "compass"], self.cfg.compass_sigma), now)
            self._pub(i, "zone", zone_sense(w, i), now)
            self._pub(i, "lifter_state", self._lifter_state(i), now)
