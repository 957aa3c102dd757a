"""Planar poses, frame transforms and three-omniwheel kinematics.

Conventions follow REP-105: ``map`` is fixed to the arena centre, ``odom`` to the
robot start, ``base_link`` to the body with +x forward. Angles are radians,
wrapped to (-pi, pi].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

TWO_PI = 2.0 * math.pi
SQRT3_2 = math.sqrt(3.0) / 2.0


def wrap_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.remainder(theta, TWO_PI)
    if a <= -math.pi:
        a += TWO_PI
    return a


class Pose2D(NamedTuple):
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def wrapped(self) -> Pose2D:
        return Pose2D(self.x, self.y, wrap_angle(self.theta))


class Twist2D(NamedTuple):
    vx: float = 0.0
    vy: float = 0.0
    omega: float = 0.0

    @property
    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)


class WheelSpeeds(NamedTuple):
    v1: float = 0.0
    v2: float = 0.0
    v3: float = 0.0


IDENTITY = Pose2D(0.0, 0.0, 0.0)


def compose(parent: Pose2D, child: Pose2D) -> Pose2D:
    """Return ``parent * child``: ``child`` expressed in the frame ``parent`` lives in."""
    c = math.cos(parent.theta)
    s = math.sin(parent.theta)
    return Pose2D(
        parent.x + c * child.x - s * child.y,
        parent.y + s * child.x + c * child.y,
        wrap_angle(parent.theta + child.theta),
    )


def invert(p: Pose2D) -> Pose2D:
    c = math.cos(p.theta)
    s = math.sin(p.theta)
    return Pose2D(-c * p.x - s * p.y, s * p.x - c * p.y, wrap_angle(-p.theta))


def relative(a: Pose2D, b: Pose2D) -> Pose2D:
    """Pose of ``b`` seen from ``a`` (both in the same frame)."""
    return compose(invert(a), b)


def rotate(vx: float, vy: float, theta: float) -> tuple[float, float]:
    c = math.cos(theta)
    s = math.sin(theta)
    return c * vx - s * vy, s * vx + c * vy


class UnknownFrameError(KeyError):
    pass


class TransformRegistry:
    """A per-robot transform tree (map -> odom -> base_link and friends).

    Each registered frame stores its pose relative to a parent frame. Frames are
    resolved by walking up to the common root.
    """

    def __init__(self, root: str = "map"):
        self.root = root
        self._parent: dict[str, tuple[str, Pose2D]] = {}

    def set(self, frame: str, parent: str, pose: Pose2D) -> None:
        if parent != self.root and parent not in self._parent:
            raise UnknownFrameError(parent)
        self._parent[frame] = (parent, pose)

    def __contains__(self, frame: str) -> bool:
        return frame == self.root or frame in self._parent

    def _to_root(self, frame: str) -> Pose2D:
        if frame == self.root:
            return IDENTITY
        if frame not in self._parent:
            raise UnknownFrameError(frame)
        pose = IDENTITY
        seen = set()
        while frame != self.root:
            if frame in seen:
                raise ValueError(f"cycle in transform tree at {frame!r}")
            seen.add(frame)
            parent, p = self._parent[frame]
            pose = compose(p, pose)
            frame = parent
        return pose

    def lookup(self, target: str, source: str) -> Pose2D:
        """Pose of ``source`` frame expressed in ``target`` frame."""
        return compose(invert(self._to_root(target)), self._to_root(source))

    def to_frame(self, pose: Pose2D, from_frame: str, to_frame: str) -> Pose2D:
        return compose(self.lookup(to_frame, from_frame), pose)


@dataclass(frozen=True)
class KinematicParams:
    R: float = 0.1  # centre-to-wheel radius [m]

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError(f"R must be positive, got {self.R}")


# Rows map (vx, vy, R*omega) to the tangential wheel velocities.
WHEEL_MATRIX = (
    (-SQRT3_2, 0.5, 1.0),
    (0.0, -1.0, 1.0),
    (SQRT3_2, -0.5, 1.0),
)

# Closed-form inverse of WHEEL_MATRIX (det = sqrt(3)).
#   R*omega = (v1 + v3) / 2
#   vy      = (v1 + v3) / 2 - v2
#   vx      = (v3 - v1 + vy) / sqrt(3)
_INV_SQRT3 = 1.0 / math.sqrt(3.0)
WHEEL_MATRIX_INV = (
    (-0.5 * _INV_SQRT3, -_INV_SQRT3, 1.5 * _INV_SQRT3),
    (0.5, -1.0, 0.5),
    (0.5, 0.0, 0.5),
)


def inverse_kinematics(twist: Twist2D, params: KinematicParams = KinematicParams()) -> WheelSpeeds:
    u = (twist.vx, twist.vy, params.R * twist.omega)
    m = WHEEL_MATRIX
    return WheelSpeeds(
        m[0][0] * u[0] + m[0][1] * u[1] + m[0][2] * u[2],
        m[1][0] * u[0] + m[1][1] * u[1] + m[1][2] * u[2],
        m[2][0] * u[0] + m[2][1] * u[1] + m[2][2] * u[2],
    )


def forward_kinematics(wheels: WheelSpeeds, params: KinematicParams = KinematicParams()) -> Twist2D:
    w = (wheels.v1, wheels.v2, wheels.v3)
    m = WHEEL_MATRIX_INV
    vx = m[0][0] * w[0] + m[0][1] * w[1] + m[0][2] * w[2]
    vy = m[1][0] * w[0] + m[1][1] * w[1] + m[1][2] * w[2]
    r_omega = m[2][0] * w[0] + m[2][1] * w[1] + m[2][2] * w[2]
    return Twist2D(vx, vy, r_omega / params.R)
