"""Square-path localization replay.

A robot drives a square at a fixed cruise speed. Odometry at 100 Hz feeds the
EKF prediction, and noisy global fixes correct it at the camera rate. The result
is the per-sample estimation error against ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Pose2D
from .localization import PoseFilter, PoseFix
from .sensing import OdometryNoise, odometry_from
from .trajectory import MotionLimits, MotionSetpoint, Waypoint, plan, sample_array


@dataclass(frozen=True)
class ReplayConfig:
    side: float = 1.6
    speed: float = 0.3
    laps: int = 1
    rate: float = 100.0
    fix_rate: float = 30.0
    fix_sigma_xy: float = 0.015
    fix_sigma_theta: float = math.radians(1.0)
    start_sigma: float = 0.05  # initial estimate error scale


def square_truth(cfg: ReplayConfig) -> tuple[np.ndarray, np.ndarray]:
    """Times and (n, 3) true poses of the square run, at ``cfg.rate``."""
    s = cfg.side / 2.0
    corners = [(s, -s), (s, s), (-s, s), (-s, -s)]
    path = [Waypoint(Pose2D(x, y, 0.0)) for _ in range(cfg.laps) for x, y in corners]
    traj = plan(MotionSetpoint(Pose2D(-s, -s, 0.0)), path, MotionLimits().scaled(cfg.speed))
    t = np.arange(int(math.ceil(traj.duration * cfg.rate)) + 1) / cfg.rate
    pos, _, _ = sample_array(traj, t)
    return t, pos


def run_square(cfg: ReplayConfig, rng: np.random.Generator) -> np.ndarray:
    """Estimation errors (n, 3): estimate minus truth, angle wrapped."""
    t, truth = square_truth(cfg)
    poses = [Pose2D(*row) for row in truth.tolist()]
    e0 = rng.standard_normal(3) * cfg.start_sigma
    ekf = PoseFilter(Pose2D(poses[0].x + e0[0], poses[0].y + e0[1], poses[0].theta + e0[2]))
    R = np.diag([cfg.fix_sigma_xy ** 2, cfg.fix_sigma_xy ** 2, cfg.fix_sigma_theta ** 2])
    dt = 1.0 / cfg.rate
    every = cfg.rate / cfg.fix_rate
    next_fix = 0.0
    noise = OdometryNoise()
    err = np.zeros((len(poses), 3))
    for i in range(1, len(poses)):
        ekf.predict(odometry_from(poses[i - 1], poses[i], dt, rng, noise))
        if i >= next_fix:
            next_fix += every
            z = rng.standard_normal(3)
            p = poses[i]
            ekf.update(PoseFix(Pose2D(p.x + z[0] * cfg.fix_sigma_xy, p.y + z[1] * cfg.fix_sigma_xy,
                                      p.theta + z[2] * cfg.fix_sigma_theta), R, t[i]))
        m = ekf.state.mean
        err[i] = (m.x - poses[i].x, m.y - poses[i].y, math.remainder(m.theta - poses[i].theta, 2 * math.pi))
    err[0] = err[1]
    return err
