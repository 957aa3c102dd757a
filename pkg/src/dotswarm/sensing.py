"""Robot senses synthesized from ground truth.

Covers the 16-beam IR time-of-flight ring, perimeter fiducials on carrier faces,
the upward markermap camera, wheel odometry, compass and zone sense, plus the
latency queue that delays camera streams.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Any, NamedTuple

import numpy as np

from .geometry import Pose2D, compose, relative, wrap_angle
from .world import FACES, LOWERED, WorldState, Zone

NO_RETURN = math.inf
N_BEAMS = 16
BEAM_BEARINGS = tuple(2.0 * math.pi * k / N_BEAMS for k in range(N_BEAMS))
MAX_RANGE = 3.5


class RangeScan(NamedTuple):
    timestamp: float
    ranges: tuple[float, ...]
    beam_bearings: tuple[float, ...] = BEAM_BEARINGS


@dataclass(frozen=True)
class IrtofNoiseModel:
    sigma_near: float = 0.020  # below near_limit
    sigma_mid: float = 0.010  # near_limit .. mid_limit
    sigma_far: float = 0.030  # beyond mid_limit
    p_slope2: float = 0.3
    p_slope3: float = 0.05
    update_rate: float = 50.0
    near_limit: float = 0.25
    mid_limit: float = 2.7
    max_range: float = MAX_RANGE

    def __post_init__(self):
        for p in (self.p_slope2, self.p_slope3):
            if not 0.0 <= p <= 1.0:
                raise ValueError("multipath probabilities must lie in [0, 1]")
        if self.p_slope2 + self.p_slope3 > 1.0:
            raise ValueError("p_slope2 + p_slope3 must not exceed 1")

    def sigma(self, d: np.ndarray) -> np.ndarray:
        return np.where(d < self.near_limit, self.sigma_near,
                        np.where(d <= self.mid_limit, self.sigma_mid, self.sigma_far))

    def corrupt(self, d, rng: np.random.Generator) -> np.ndarray:
        """Noisy readings for true distances ``d``; draws a fixed 2 numbers per beam."""
        d = np.asarray(d, dtype=float)
        u = rng.random(d.shape)
        z = rng.standard_normal(d.shape)
        finite = np.isfinite(d)
        dd = np.where(finite, d, 0.0)
        near = dd < self.near_limit
        mult = np.where(near & (u < self.p_slope2), 2.0,
                        np.where(near & (u < self.p_slope2 + self.p_slope3), 3.0, 1.0))
        out = np.maximum(mult * dd + z * self.sigma(dd), 1e-3)
        return np.where(finite & (dd <= self.max_range), out, NO_RETURN)


# ---------------------------------------------------------------------------
# ray casting


def _obstacle_discs(world: WorldState) -> tuple[np.ndarray, np.ndarray]:
    """All discs the IR beams can hit: (centres (m, 2), radii (m,), owner robot or -1)."""
    cs, rs, own = [], [], []
    for r in world.robots:
        cs.append((r.pose.x, r.pose.y))
        rs.append(world.physics.radius)
        own.append(r.id)
    lr = world.geometry.leg_radius
    for c in world.carriers:
        for leg in world.legs(c):
            cs.append(leg)
            rs.append(lr)
            own.append(-1)
    return np.array(cs, dtype=float).reshape(-1, 2), np.array(rs, dtype=float), np.array(own)


def ray_distances(world: WorldState, origins: np.ndarray, dirs: np.ndarray,
                  owners: np.ndarray) -> np.ndarray:
    """Distance along each ray to the first wall or disc (inf if none).

    ``owners`` gives, per ray, the robot whose own body must be ignored.
    """
    hx, hy = world.arena.width / 2.0, world.arena.height / 2.0
    ox, oy = origins[:, 0], origins[:, 1]
    dx, dy = dirs[:, 0], dirs[:, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        tx = np.where(dx > 0, (hx - ox) / dx, np.where(dx < 0, (-hx - ox) / dx, np.inf))
        ty = np.where(dy > 0, (hy - oy) / dy, np.where(dy < 0, (-hy - oy) / dy, np.inf))
    t = np.minimum(tx, ty)
    C, R, own = _obstacle_discs(world)
    if len(C):
        ocx = C[None, :, 0] - ox[:, None]
        ocy = C[None, :, 1] - oy[:, None]
        b = ocx * dx[:, None] + ocy * dy[:, None]
        c = ocx * ocx + ocy * ocy - R[None, :] ** 2
        disc = b * b - c
        hit = (disc >= 0.0) & (own[None, :] != owners[:, None]) & (c > 0.0)
        th = np.where(hit, b - np.sqrt(np.where(hit, disc, 0.0)), np.inf)
        th = np.where(th > 0.0, th, np.inf)
        t = np.minimum(t, th.min(axis=1))
    return t


def true_ranges(world: WorldState, robot_ids=None) -> np.ndarray:
    """Noise-free beam distances, shape (len(robot_ids), 16); inf beyond max range."""
    ids = list(range(len(world.robots))) if robot_ids is None else list(robot_ids)
    rad = world.physics.radius
    bear = np.asarray(BEAM_BEARINGS)
    th = np.concatenate([world.robots[i].pose.theta + bear for i in ids])
    dirs = np.column_stack([np.cos(th), np.sin(th)])
    centres = np.repeat([[world.robots[i].pose.x, world.robots[i].pose.y] for i in ids], N_BEAMS, axis=0)
    owners = np.repeat(ids, N_BEAMS)
    d = ray_distances(world, centres + rad * dirs, dirs, owners)
    return np.where(d <= MAX_RANGE, d, np.inf).reshape(len(ids), N_BEAMS)


def sample_irtof(world: WorldState, robot_id: int, rng: np.random.Generator,
                 model: IrtofNoiseModel = IrtofNoiseModel()) -> RangeScan:
    d = true_ranges(world, [robot_id])[0]
    return RangeScan(world.time, tuple(model.corrupt(d, rng).tolist()))


# ---------------------------------------------------------------------------
# cameras


class FiducialDetection(NamedTuple):
    carrier_id: int
    face: str
    pose_in_base_link: Pose2D  # marker frame: +x is the face's outward normal
    timestamp: float


@dataclass(frozen=True)
class CameraParams:
    detection_range: float = 1.0
    max_view_angle: float = math.radians(60.0)
    sigma_t_ref: float = 0.010  # fiducial translation noise at ref_range
    sigma_theta_ref: float = math.radians(2.0)
    ref_range: float = 0.5
    markermap_inset: float = 0.020
    leg_shadow: float = 0.040
    markermap_sigma_t: float = 0.005
    markermap_sigma_theta: float = math.radians(1.0)
    rate: float = 50.0
    delay_mean: float = 0.0785
    delay_sigma: float = 0.0115
    see_carried: bool = False


def _segment_blocked(p, q, discs) -> bool:
    px, py = p
    vx, vy = q[0] - px, q[1] - py
    L2 = vx * vx + vy * vy
    for cx, cy, r in discs:
        t = ((cx - px) * vx + (cy - py) * vy) / L2 if L2 > 0 else 0.0
        t = min(max(t, 0.0), 1.0)
        ex, ey = px + t * vx - cx, py + t * vy - cy
        if ex * ex + ey * ey < r * r:
            return True
    return False


def detect_side_fiducials(world: WorldState, robot_id: int, rng: np.random.Generator,
                          params: CameraParams = CameraParams()) -> list[FiducialDetection]:
    """Face markers in range, seen within the view-angle cone and not occluded."""
    me = world.robots[robot_id]
    px, py = me.pose.x, me.pose.y
    half = world.geometry.half
    cos_lim = math.cos(params.max_view_angle)
    out = []
    for c in world.carriers:
        if c.id == me.carrying or (c.carried_by is not None and not params.see_carried):
            continue
        if math.hypot(c.pose.x - px, c.pose.y - py) > params.detection_range + half:
            continue
        for face, ang in FACES.items():
            nth = c.pose.theta + ang
            nx, ny = math.cos(nth), math.sin(nth)
            mx, my = c.pose.x + half * nx, c.pose.y + half * ny
            sx, sy = px - mx, py - my
            rng_ = math.hypot(sx, sy)
            if rng_ > params.detection_range or rng_ <= 0.0:
                continue
            if (nx * sx + ny * sy) / rng_ < cos_lim:
                continue
            occluders = [(r.pose.x, r.pose.y, world.physics.radius) for r in world.robots if r.id != robot_id]
            occluders += [(lx, ly, world.geometry.leg_radius) for o in world.carriers if o.id != c.id
                          for lx, ly in world.legs(o)]
            if _segment_blocked((px, py), (mx, my), occluders):
                continue
            true = relative(me.pose, Pose2D(mx, my, wrap_angle(nth)))
            k = rng_ / params.ref_range
            e = rng.standard_normal(3)
            noisy = Pose2D(true.x + e[0] * params.sigma_t_ref * k, true.y + e[1] * params.sigma_t_ref * k,
                           wrap_angle(true.theta + e[2] * params.sigma_theta_ref * k))
            out.append(FiducialDetection(c.id, face, noisy, world.time))
    return out


def markermap_visible(local_x: float, local_y: float, half: float, inset: float, shadow: float) -> bool:
    """Whether the upward camera at (local_x, local_y) in the carrier frame sees a full marker."""
    lim = half - inset
    ax, ay = abs(local_x), abs(local_y)
    if ax > lim or ay > lim:
        return False
    return not (ax > lim - shadow and ay > lim - shadow)


def detect_markermap(world: WorldState, robot_id: int, rng: np.random.Generator,
                     params: CameraParams = CameraParams()) -> Pose2D | None:
    """Carrier centre in base_link, or None when no complete marker is visible."""
    me = world.robots[robot_id]
    if me.lifter != LOWERED:
        return None
    g = world.geometry
    for c in world.carriers:
        if c.carried_by is not None:
            continue
        loc = relative(c.pose, Pose2D(me.pose.x, me.pose.y, 0.0))
        if markermap_visible(loc.x, loc.y, g.half, params.markermap_inset, params.leg_shadow):
            true = relative(me.pose, c.pose)
            e = rng.standard_normal(3)
            return Pose2D(true.x + e[0] * params.markermap_sigma_t, true.y + e[1] * params.markermap_sigma_t,
                          wrap_angle(true.theta + e[2] * params.markermap_sigma_theta))
    return None


# ---------------------------------------------------------------------------
# latency


class LatencyQueue:
    """Delays payloads by max(0, N(mean, sigma)) while keeping emission order.

    A payload that would overtake an earlier one is held until the earlier one
    is out, so the effective delivery time is the running maximum.
    """

    def __init__(self, delay_mean: float = 0.0, delay_sigma: float = 0.0,
                 rng: np.random.Generator | None = None):
        if delay_mean < 0 or delay_sigma < 0:
            raise ValueError("delay parameters must be non-negative")
        self.delay_mean = delay_mean
        self.delay_sigma = delay_sigma
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self._heap: list[tuple[float, int, float, Any]] = []
        self._seq = 0
        self._last = -math.inf

    def push(self, payload: Any, emitted: float) -> float:
        """Enqueue; returns the delivery time."""
        d = self.delay_mean
        if self.delay_sigma > 0:
            d += self.delay_sigma * float(self.rng.standard_normal())
        due = max(emitted + max(d, 0.0), self._last)
        self._last = due
        heapq.heappush(self._heap, (due, self._seq, emitted, payload))
        self._seq += 1
        return due

    def delayed(self, now: float) -> list[Any]:
        out = []
        while self._heap and self._heap[0][0] <= now + 1e-9:
            out.append(heapq.heappop(self._heap)[3])
        return out

    def delayed_with_times(self, now: float) -> list[tuple[float, float, Any]]:
        """Like :meth:`delayed` but yields (emitted, delivered, payload)."""
        out = []
        while self._heap and self._heap[0][0] <= now + 1e-9:
            due, _, em, p = heapq.heappop(self._heap)
            out.append((em, due, p))
        return out

    def __len__(self) -> int:
        return len(self._heap)


def delayed(queue: LatencyQueue, now: float) -> list[Any]:
    return queue.delayed(now)


# ---------------------------------------------------------------------------
# proprioception


class OdometryDelta(NamedTuple):
    d_pose: Pose2D  # displacement in the base_link frame at the previous sample
    dt: float


@dataclass(frozen=True)
class OdometryNoise:
    trans_frac: float = 0.02
    rot_frac: float = 0.01


def odometry_from(prev: Pose2D, cur: Pose2D, dt: float, rng: np.random.Generator,
                  noise: OdometryNoise = OdometryNoise()) -> OdometryDelta:
    if not dt > 0:
        raise ValueError("dt must be positive")
    d = relative(prev, cur)
    tr = math.hypot(d.x, d.y)
    e = rng.standard_normal(3)
    st = noise.trans_frac * tr
    return OdometryDelta(Pose2D(d.x + e[0] * st, d.y + e[1] * st,
                                wrap_angle(d.theta + e[2] * noise.rot_frac * abs(d.theta))), dt)


def sample_odometry(world: WorldState, robot_id: int, dt: float, rng: np.random.Generator,
                    noise: OdometryNoise = OdometryNoise()) -> OdometryDelta:
    """Noisy body-frame displacement since the previous call for this robot."""
    r = world.robots[robot_id]
    prev = r.odom_ref if r.odom_ref is not None else r.pose
    r.odom_ref = r.pose
    return odometry_from(prev, r.pose, dt, rng, noise)


def integrate_odometry(pose: Pose2D, delta: OdometryDelta) -> Pose2D:
    return compose(pose, delta.d_pose)


def zone_sense(world: WorldState, robot_id: int) -> Zone:
    return world.arena.zone(world.robots[robot_id].pose.x)


def compass(world: WorldState, robot_id: int, rng: np.random.Generator,
            sigma: float = math.radians(2.0)) -> float:
    return wrap_angle(world.robots[robot_id].pose.theta + sigma * float(rng.standard_normal()))
