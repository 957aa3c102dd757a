"""Ground-truth world: arena, carriers, disc robots and the 100 Hz stepper.

Robots are discs sliding over the floor with viscous friction. A per-axis
velocity loop turns the body-frame setpoint into a force (and torque). After a
semi-implicit Euler step, contacts are resolved by projection with no bounce.
Carriers are immovable unless lifted. A lifted carrier rides rigidly on its
robot, and its legs then collide as part of that robot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .geometry import Pose2D, Twist2D, compose, relative, rotate, wrap_angle

LOWERED, RAISING, RAISED, LOWERING = "lowered", "raising", "raised", "lowering"


class LiftResult(Enum):
    LIFTED = "lifted"
    MISALIGNED = "misaligned"
    NOTHING_ABOVE = "nothing_above"
    BUSY = "busy"


class Zone(Enum):
    SEARCH = "search"
    DROP = "drop"
    NEITHER = "neither"


class SpawnError(RuntimeError):
    pass


@dataclass(frozen=True)
class Arena:
    width: float = 5.0
    height: float = 5.0
    search_x: float = 0.0  # search zone is x < search_x
    drop_x: float = 1.25  # drop zone is x > drop_x

    def zone(self, x: float) -> Zone:
        if x < self.search_x:
            return Zone.SEARCH
        if x > self.drop_x:
            return Zone.DROP
        return Zone.NEITHER


@dataclass(frozen=True)
class CarrierGeometry:
    half: float = 0.165  # tray half-width (330 mm square)
    leg_radius: float = 0.01
    clearance: float = 0.175

    @property
    def leg_offsets(self) -> tuple[tuple[float, float], ...]:
        a = self.half - self.leg_radius
        return ((a, a), (-a, a), (-a, -a), (a, -a))


# outward normal angle of each face in the carrier frame
FACES = {"E": 0.0, "N": math.pi / 2, "W": math.pi, "S": -math.pi / 2}


@dataclass(frozen=True)
class PhysicsParams:
    dt: float = 0.01
    radius: float = 0.125
    mass: float = 3.0
    v_max: float = 2.0
    a_max: float = 2.0
    kp: float = 30.0  # N per m/s of velocity error
    friction: float = 6.0  # viscous, N s/m
    omega_max: float = 10.0
    alpha_max: float = 20.0
    lift_tolerance: float = 0.03
    actuation_time: float = 1.0
    contact_passes: int = 4

    @property
    def force_limit(self) -> float:
        return self.mass * self.a_max

    @property
    def inertia(self) -> float:
        return 0.5 * self.mass * self.radius ** 2


@dataclass
class RobotState:
    id: int
    pose: Pose2D
    velocity: Twist2D = Twist2D()  # map frame
    lifter: str = LOWERED
    lifter_until: float = 0.0
    carrying: int | None = None
    command: Twist2D = Twist2D()  # body-frame velocity setpoint
    odom_ref: Pose2D | None = None  # true pose at the last odometry sample


@dataclass
class CarrierState:
    id: int
    pose: Pose2D
    carried_by: int | None = None
    offset: Pose2D = Pose2D()  # pose relative to the carrying robot


@dataclass
class WorldState:
    robots: list[RobotState]
    carriers: list[CarrierState]
    arena: Arena = field(default_factory=Arena)
    geometry: CarrierGeometry = field(default_factory=CarrierGeometry)
    physics: PhysicsParams = field(default_factory=PhysicsParams)
    time: float = 0.0

    def robot(self, rid: int) -> RobotState:
        r = self.robots[rid]
        if r.id != rid:
            raise KeyError(rid)
        return r

    def carrier(self, cid: int) -> CarrierState:
        c = self.carriers[cid]
        if c.id != cid:
            raise KeyError(cid)
        return c

    def legs(self, carrier: CarrierState) -> list[tuple[float, float]]:
        p = carrier.pose
        c, s = math.cos(p.theta), math.sin(p.theta)
        return [(p.x + c * ox - s * oy, p.y + s * ox + c * oy) for ox, oy in self.geometry.leg_offsets]


# ---------------------------------------------------------------------------
# dynamics


def _axis_force(v_set: float, v: float, k: float, c: float, limit: float) -> float:
    # friction feed-forward plus a clipped proportional term
    return c * v_set + min(max(k * (v_set - v), -limit), limit)


def _clip_speed(cmd: Twist2D, p: PhysicsParams) -> Twist2D:
    vx, vy, om = cmd
    sp = math.hypot(vx, vy)
    if sp > p.v_max:
        vx, vy = vx * p.v_max / sp, vy * p.v_max / sp
    return Twist2D(vx, vy, min(max(om, -p.omega_max), p.omega_max))


def step(world: WorldState, dt: float | None = None) -> WorldState:
    """Advance the world one physics step in place and return it."""
    p = world.physics
    dt = p.dt if dt is None else dt
    t_next = round(world.time + dt, 9)  # keeps long runs on the 10 ms grid
    m, inertia = p.mass, p.inertia
    rot_k = p.kp / m * inertia
    rot_c = p.friction / m * inertia
    for r in world.robots:
        if r.lifter in (RAISING, LOWERING):
            r.velocity = Twist2D()
            if t_next >= r.lifter_until - 1e-9:
                r.lifter = RAISED if r.lifter == RAISING else LOWERED
            continue
        cmd = _clip_speed(r.command, p)
        sx, sy = rotate(cmd.vx, cmd.vy, r.pose.theta)
        v = r.velocity
        fx = _axis_force(sx, v.vx, p.kp, p.friction, p.force_limit)
        fy = _axis_force(sy, v.vy, p.kp, p.friction, p.force_limit)
        # the proportional part is clipped as a vector, not per axis
        ex, ey = p.kp * (sx - v.vx), p.kp * (sy - v.vy)
        en = math.hypot(ex, ey)
        if en > p.force_limit:
            fx = p.friction * sx + ex * p.force_limit / en
            fy = p.friction * sy + ey * p.force_limit / en
        tq = _axis_force(cmd.omega, v.omega, rot_k, rot_c, inertia * p.alpha_max)
        vx = v.vx + (fx - p.friction * v.vx) / m * dt
        vy = v.vy + (fy - p.friction * v.vy) / m * dt
        om = v.omega + (tq - rot_c * v.omega) / inertia * dt
        r.velocity = Twist2D(vx, vy, om)
        r.pose = Pose2D(r.pose.x + vx * dt, r.pose.y + vy * dt, wrap_angle(r.pose.theta + om * dt))
    world.time = t_next
    _resolve_contacts(world)
    _attach_carried(world)
    return world


def _attach_carried(world: WorldState) -> None:
    for c in world.carriers:
        if c.carried_by is not None:
            c.pose = compose(world.robots[c.carried_by].pose, c.offset)


def _robot_discs(world: WorldState, r: RobotState) -> list[tuple[float, float, float]]:
    """(x, y, radius) of every disc that moves with robot ``r``."""
    discs = [(r.pose.x, r.pose.y, world.physics.radius)]
    if r.carrying is not None:
        c = world.carriers[r.carrying]
        pose = compose(r.pose, c.offset)
        lr = world.geometry.leg_radius
        cc, ss = math.cos(pose.theta), math.sin(pose.theta)
        for ox, oy in world.geometry.leg_offsets:
            discs.append((pose.x + cc * ox - ss * oy, pose.y + ss * ox + cc * oy, lr))
    return discs


def _push(r: RobotState, dx: float, dy: float, nx: float, ny: float) -> None:
    """Translate ``r`` by (dx, dy) and drop its velocity component along -n."""
    r.pose = Pose2D(r.pose.x + dx, r.pose.y + dy, r.pose.theta)
    vn = r.velocity.vx * nx + r.velocity.vy * ny
    if vn < 0.0:
        r.velocity = Twist2D(r.velocity.vx - vn * nx, r.velocity.vy - vn * ny, r.velocity.omega)


def tray_overlap(a: Pose2D, b: Pose2D, half: float) -> tuple[float, float, float] | None:
    """Separating-axis test for two square trays.

    Returns (depth, nx, ny) with n the unit direction to push ``a`` away from
    ``b``, or None when the trays do not overlap.
    """
    dx, dy = a.x - b.x, a.y - b.y
    if dx * dx + dy * dy >= 8.0 * half * half:
        return None
    axes = []
    for th in (a.theta, b.theta):
        c, s = math.cos(th), math.sin(th)
        axes += [(c, s), (-s, c)]
    best = None
    for ux, uy in axes:
        ra = half * (sum(abs(ux * ex + uy * ey) for ex, ey in _edges(a.theta)))
        rb = half * (sum(abs(ux * ex + uy * ey) for ex, ey in _edges(b.theta)))
        sep = dx * ux + dy * uy
        depth = ra + rb - abs(sep)
        if depth <= 0.0:
            return None
        if best is None or depth < best[0]:
            sg = 1.0 if sep >= 0.0 else -1.0
            best = (depth, sg * ux, sg * uy)
    return best


def _edges(theta: float) -> tuple[tuple[float, float], tuple[float, float]]:
    c, s = math.cos(theta), math.sin(theta)
    return (c, s), (-s, c)


def _carried_pose(world: WorldState, r: RobotState) -> Pose2D | None:
    if r.carrying is None:
        return None
    return compose(r.pose, world.carriers[r.carrying].offset)


def _resolve_contacts(world: WorldState) -> None:
    p = world.physics
    hx, hy = world.arena.width / 2.0, world.arena.height / 2.0
    reach = p.radius + 2.0 * world.geometry.half
    static = [c for c in world.carriers if c.carried_by is None]
    static_legs = [(c, world.legs(c)) for c in static]
    lr = world.geometry.leg_radius
    for _ in range(p.contact_passes):
        moved = False
        for r in world.robots:
            # walls
            for x, y, rad in _robot_discs(world, r):
                for pen, nx, ny in ((x - rad + hx, 1.0, 0.0), (hx - x - rad, -1.0, 0.0),
                                    (y - rad + hy, 0.0, 1.0), (hy - y - rad, 0.0, -1.0)):
                    if pen < 0.0:
                        _push(r, -pen * nx, -pen * ny, nx, ny)
                        moved = True
            # resting carriers
            for c, legs in static_legs:
                if abs(c.pose.x - r.pose.x) > reach + 0.05 or abs(c.pose.y - r.pose.y) > reach + 0.05:
                    continue
                for x, y, rad in _robot_discs(world, r):
                    for lx, ly in legs:
                        dx, dy = x - lx, y - ly
                        d2 = dx * dx + dy * dy
                        lim = rad + lr
                        if d2 < lim * lim:
                            d = math.sqrt(d2)
                            nx, ny = (dx / d, dy / d) if d > 1e-12 else (1.0, 0.0)
                            _push(r, nx * (lim - d), ny * (lim - d), nx, ny)
                            moved = True
            # a carried tray cannot pass through a resting one
            tray = _carried_pose(world, r)
            if tray is not None:
                for c in static:
                    hit = tray_overlap(tray, c.pose, world.geometry.half)
                    if hit is not None:
                        depth, nx, ny = hit
                        _push(r, nx * depth, ny * depth, nx, ny)
                        tray = _carried_pose(world, r)
                        moved = True
        # robot pairs, each with whatever it carries
        n = len(world.robots)
        for i in range(n):
            a = world.robots[i]
            for j in range(i + 1, n):
                b = world.robots[j]
                if abs(a.pose.x - b.pose.x) > 2 * reach or abs(a.pose.y - b.pose.y) > 2 * reach:
                    continue
                for ax, ay, ar in _robot_discs(world, a):
                    for bx, by, br in _robot_discs(world, b):
                        dx, dy = ax - bx, ay - by
                        d2 = dx * dx + dy * dy
                        lim = ar + br
                        if d2 < lim * lim:
                            d = math.sqrt(d2)
                            nx, ny = (dx / d, dy / d) if d > 1e-12 else (1.0, 0.0)
                            h = 0.5 * (lim - d)
                            # inelastic: both take the mean normal velocity
                            va = a.velocity.vx * nx + a.velocity.vy * ny
                            vb = b.velocity.vx * nx + b.velocity.vy * ny
                            if va - vb < 0.0:
                                vm = 0.5 * (va + vb)
                                a.velocity = Twist2D(a.velocity.vx + (vm - va) * nx, a.velocity.vy + (vm - va) * ny,
                                                     a.velocity.omega)
                                b.velocity = Twist2D(b.velocity.vx + (vm - vb) * nx, b.velocity.vy + (vm - vb) * ny,
                                                     b.velocity.omega)
                            a.pose = Pose2D(a.pose.x + nx * h, a.pose.y + ny * h, a.pose.theta)
                            b.pose = Pose2D(b.pose.x - nx * h, b.pose.y - ny * h, b.pose.theta)
                            moved = True
                ta, tb = _carried_pose(world, a), _carried_pose(world, b)
                if ta is not None and tb is not None:
                    hit = tray_overlap(ta, tb, world.geometry.half)
                    if hit is not None:
                        depth, nx, ny = hit
                        _push(a, 0.5 * depth * nx, 0.5 * depth * ny, nx, ny)
                        _push(b, -0.5 * depth * nx, -0.5 * depth * ny, -nx, -ny)
                        moved = True
        if not moved:
            break


def max_overlap(world: WorldState) -> float:
    """Largest interpenetration depth anywhere (0 when contact-free)."""
    p = world.physics
    hx, hy = world.arena.width / 2.0, world.arena.height / 2.0
    worst = 0.0
    lr = world.geometry.leg_radius
    static_legs = [leg for c in world.carriers if c.carried_by is None for leg in world.legs(c)]
    discs = [_robot_discs(world, r) for r in world.robots]
    for i, ds in enumerate(discs):
        for x, y, rad in ds:
            worst = max(worst, rad - (x + hx), rad - (hx - x), rad - (y + hy), rad - (hy - y))
            for lx, ly in static_legs:
                worst = max(worst, rad + lr - math.hypot(x - lx, y - ly))
            for j in range(i + 1, len(discs)):
                for bx, by, br in discs[j]:
                    worst = max(worst, rad + br - math.hypot(x - bx, y - by))
    trays = [c.pose for c in world.carriers]
    for i in range(len(trays)):
        for j in range(i):
            hit = tray_overlap(trays[i], trays[j], world.geometry.half)
            if hit is not None:
                worst = max(worst, hit[0])
    return worst


# ---------------------------------------------------------------------------
# lifter


def carrier_above(world: WorldState, rid: int) -> CarrierState | None:
    """Resting carrier whose tray footprint contains the robot centre."""
    r = world.robots[rid]
    h = world.geometry.half
    for c in world.carriers:
        if c.carried_by is not None:
            continue
        loc = relative(c.pose, Pose2D(r.pose.x, r.pose.y, 0.0))
        if abs(loc.x) < h and abs(loc.y) < h:
            return c
    return None


def attempt_lift(world: WorldState, rid: int) -> tuple[LiftResult, int | None]:
    r = world.robots[rid]
    if r.carrying is not None or r.lifter in (RAISING, RAISED):
        return LiftResult.BUSY, None
    c = carrier_above(world, rid)
    if c is None:
        return LiftResult.NOTHING_ABOVE, None
    p = world.physics
    off = math.hypot(c.pose.x - r.pose.x, c.pose.y - r.pose.y)
    clear = all(math.hypot(lx - r.pose.x, ly - r.pose.y) >= p.radius + world.geometry.leg_radius
                for lx, ly in world.legs(c))
    if off > p.lift_tolerance or not clear:
        return LiftResult.MISALIGNED, c.id
    r.carrying = c.id
    r.lifter = RAISING
    r.lifter_until = world.time + p.actuation_time
    r.velocity = Twist2D()
    c.carried_by = rid
    c.offset = relative(r.pose, c.pose)
    return LiftResult.LIFTED, c.id


def lower(world: WorldState, rid: int) -> int | None:
    """Set down whatever robot ``rid`` carries; returns the carrier id or None."""
    r = world.robots[rid]
    if r.carrying is None:
        return None
    c = world.carriers[r.carrying]
    c.pose = compose(r.pose, c.offset)
    c.carried_by = None
    r.carrying = None
    r.lifter = LOWERING
    r.lifter_until = world.time + world.physics.actuation_time
    r.velocity = Twist2D()
    return c.id


# ---------------------------------------------------------------------------
# spawning


@dataclass(frozen=True)
class SpawnConfig:
    robots: int = 5
    carriers: int = 5
    robot_poses: Sequence[Sequence[float]] | None = None
    carrier_poses: Sequence[Sequence[float]] | None = None
    robot_gap: float = 0.1  # free space between spawned robots
    carrier_wall_margin: float = 0.75  # carrier centre to wall
    carrier_separation: float = 0.9  # between carrier centres
    max_attempts: int = 1000


def _sample_points(n, lo, hi, min_sep, rng, attempts):
    pts = []
    for _ in range(n):
        for _ in range(attempts):
            q = rng.uniform(lo, hi)
            if all(math.hypot(q[0] - a[0], q[1] - a[1]) >= min_sep for a in pts):
                pts.append((float(q[0]), float(q[1])))
                break
        else:
            raise SpawnError(f"could not place {n} items without overlap after {attempts} attempts")
    return pts


def spawn(cfg: SpawnConfig, rng: np.random.Generator, arena: Arena = Arena(),
          geometry: CarrierGeometry = CarrierGeometry(), physics: PhysicsParams = PhysicsParams()) -> WorldState:
    """Robots in the drop zone with random headings, carriers in the search zone."""
    hx, hy = arena.width / 2.0, arena.height / 2.0
    rad = physics.radius
    if cfg.robot_poses is not None:
        poses = [Pose2D(*map(float, q)).wrapped() for q in cfg.robot_poses]
        _check_separation([(q.x, q.y) for q in poses], 2 * rad, "robot")
    else:
        pts = _sample_points(cfg.robots, (arena.drop_x + rad, -hy + rad), (hx - rad, hy - rad),
                             2 * rad + cfg.robot_gap, rng, cfg.max_attempts)
        poses = [Pose2D(x, y, wrap_angle(float(rng.uniform(-math.pi, math.pi)))) for x, y in pts]
    robots = [RobotState(i, q, odom_ref=q) for i, q in enumerate(poses)]
    if cfg.carrier_poses is not None:
        cposes = [Pose2D(*map(float, q)).wrapped() for q in cfg.carrier_poses]
        _check_separation([(q.x, q.y) for q in cposes], 2 * geometry.half * math.sqrt(2), "carrier")
    else:
        m = cfg.carrier_wall_margin
        hi_x = min(arena.search_x - geometry.half - 0.05, hx - m)
        pts = _sample_points(cfg.carriers, (-hx + m, -hy + m), (hi_x, hy - m),
                             cfg.carrier_separation, rng, cfg.max_attempts)
        cposes = [Pose2D(x, y, wrap_angle(float(rng.uniform(-math.pi, math.pi)))) for x, y in pts]
    carriers = [CarrierState(i, q) for i, q in enumerate(cposes)]
    return WorldState(robots, carriers, arena, geometry, physics)


def _check_separation(pts, min_sep, what):
    for i in range(len(pts)):
        for j in range(i):
            if math.hypot(pts[i][0] - pts[j][0], pts[i][1] - pts[j][1]) < min_sep:
                raise SpawnError(f"requested {what} poses {j} and {i} overlap")


# ---------------------------------------------------------------------------
# task status


def delivered(world: WorldState) -> int:
    return sum(1 for c in world.carriers if c.carried_by is None and world.arena.zone(c.pose.x) is Zone.DROP)


def robots_clear(world: WorldState) -> bool:
    """No robot centre inside any tray footprint."""
    h = world.geometry.half
    for r in world.robots:
        for c in world.carriers:
            loc = relative(c.pose, Pose2D(r.pose.x, r.pose.y, 0.0))
            if abs(loc.x) < h and abs(loc.y) < h:
                return False
    return True


def task_complete(world: WorldState) -> bool:
    return delivered(world) == len(world.carriers) and robots_clear(world)
