"""Pose EKF on (x, y, theta): odometry predicts, global pose fixes correct."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .geometry import Pose2D, compose, invert, wrap_angle
from .sensing import OdometryDelta, OdometryNoise

CHI2_GATE = 9.0
INITIAL_COV = np.diag([0.1 ** 2, 0.1 ** 2, 0.2 ** 2])


class EkfState(NamedTuple):
    mean: Pose2D
    cov: np.ndarray


class PoseFix(NamedTuple):
    pose: Pose2D
    cov: np.ndarray
    timestamp: float = 0.0


class FixRejected(ValueError):
    def __init__(self, mahalanobis2: float):
        super().__init__(f"fix rejected: squared Mahalanobis distance {mahalanobis2:.2f} > {CHI2_GATE}")
        self.mahalanobis2 = mahalanobis2


def initial_state(pose: Pose2D, cov: np.ndarray = INITIAL_COV) -> EkfState:
    return EkfState(pose.wrapped(), np.array(cov, dtype=float))


def _sym(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def motion_noise(delta: Pose2D, noise: OdometryNoise = OdometryNoise()) -> np.ndarray:
    """Body-frame diagonal Q matching the odometry noise model."""
    st = noise.trans_frac * math.hypot(delta.x, delta.y)
    return np.diag([st * st, st * st, (noise.rot_frac * delta.theta) ** 2])


def predict(state: EkfState, odom: OdometryDelta, Q: np.ndarray | None = None,
            noise: OdometryNoise = OdometryNoise()) -> EkfState:
    """Advance the mean by the body-frame delta and grow the covariance.

    ``Q`` is the body-frame motion noise; by default it follows the odometry
    noise fractions.
    """
    if not odom.dt > 0:
        raise ValueError("dt must be positive")
    m, d = state.mean, odom.d_pose
    c, s = math.cos(m.theta), math.sin(m.theta)
    F = np.array([[1.0, 0.0, -s * d.x - c * d.y],
                  [0.0, 1.0, c * d.x - s * d.y],
                  [0.0, 0.0, 1.0]])
    G = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    Qb = motion_noise(d, noise) if Q is None else np.asarray(Q, dtype=float)
    P = F @ state.cov @ F.T + G @ Qb @ G.T
    return EkfState(compose(m, d), _sym(P))


def innovation(state: EkfState, fix: PoseFix) -> np.ndarray:
    m, z = state.mean, fix.pose
    return np.array([z.x - m.x, z.y - m.y, wrap_angle(z.theta - m.theta)])


def update(state: EkfState, fix: PoseFix, gate: float = CHI2_GATE) -> EkfState:
    """Identity-measurement update; raises :class:`FixRejected` on a gated outlier."""
    R = np.asarray(fix.cov, dtype=float)
    P = state.cov
    y = innovation(state, fix)
    S = P + R
    d2 = float(y @ np.linalg.solve(S, y))
    if d2 > gate:
        raise FixRejected(d2)
    K = np.linalg.solve(S.T, P.T).T  # P S^-1
    I_K = np.eye(3) - K
    Pn = I_K @ P @ I_K.T + K @ R @ K.T  # Joseph form keeps P positive definite
    dx = K @ y
    m = state.mean
    return EkfState(Pose2D(m.x + dx[0], m.y + dx[1], wrap_angle(m.theta + dx[2])), _sym(Pn))


def map_to_odom(state: EkfState, odom_pose: Pose2D) -> Pose2D:
    """The map -> odom transform implied by the current estimate."""
    return compose(state.mean, invert(odom_pose))


class PoseFilter:
    """Stateful wrapper: one per robot."""

    def __init__(self, pose: Pose2D, cov: np.ndarray = INITIAL_COV):
        self.state = initial_state(pose, cov)
        self.rejected = 0

    def predict(self, odom: OdometryDelta, Q: np.ndarray | None = None) -> None:
        self.state = predict(self.state, odom, Q)

    def update(self, fix: PoseFix) -> bool:
        try:
            self.state = update(self.state, fix)
        except FixRejected:
            self.rejected += 1
            return False
        return True
