"""Jerk-limited multi-waypoint trajectories played out as 100 Hz setpoints.

Each path segment (previous state -> next waypoint) is solved per axis as a
jerk-limited S-curve: a velocity-change ramp from the start state to a cruise
velocity, an optional cruise, and a ramp down to the waypoint velocity. The two
translational axes are expressed in a rotated frame and given shares of the
velocity/acceleration budget whose squares sum to at most one, so the vector
speed and acceleration never exceed the limits. All axes of a segment are then
stretched to the duration of the slowest one.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq

from .geometry import Pose2D, Twist2D, rotate, wrap_angle

_EPS = 1e-12


class InfeasibleWaypointError(ValueError):
    pass


@dataclass(frozen=True)
class MotionLimits:
    v_max: float = 2.0
    a_max: float = 2.0
    j_max: float = 20.0
    omega_max: float = 10.0
    alpha_max: float = 20.0
    rot_jerk_max: float = 200.0

    def __post_init__(self):
        for name in ("v_max", "a_max", "j_max", "omega_max", "alpha_max", "rot_jerk_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")

    def scaled(self, speed: float) -> MotionLimits:
        """Same limits with a lower translational speed cap."""
        return MotionLimits(min(speed, self.v_max), self.a_max, self.j_max,
                            self.omega_max, self.alpha_max, self.rot_jerk_max)


class Waypoint(NamedTuple):
    position: Pose2D
    velocity: Twist2D = Twist2D()


class MotionSetpoint(NamedTuple):
    position: Pose2D
    velocity: Twist2D = Twist2D()
    acceleration: Twist2D = Twist2D()


# ---------------------------------------------------------------------------
# 1D profiles


class Profile1D:
    """Piecewise-constant-jerk motion of one axis from (p0, v0, a0)."""

    __slots__ = ("p0", "v0", "a0", "knots", "states", "jerks", "duration")

    def __init__(self, p0: float, v0: float, a0: float, pieces: Sequence[tuple[float, float]]):
        self.p0, self.v0, self.a0 = p0, v0, a0
        knots = [0.0]
        states = [(p0, v0, a0)]
        jerks = []
        p, v, a, t = p0, v0, a0, 0.0
        for dt, j in pieces:
            if dt <= 0.0:
                continue
            p = p + v * dt + a * dt * dt / 2.0 + j * dt ** 3 / 6.0
            v = v + a * dt + j * dt * dt / 2.0
            a = a + j * dt
            t += dt
            knots.append(t)
            states.append((p, v, a))
            jerks.append(j)
        self.knots = knots
        self.states = states
        self.jerks = jerks
        self.duration = t

    def end_state(self) -> tuple[float, float, float]:
        return self.states[-1]

    def sample(self, t: float) -> tuple[float, float, float]:
        if t <= 0.0:
            return self.states[0]
        if t >= self.duration:
            p, v, _ = self.states[-1]
            return p + v * (t - self.duration), v, 0.0
        i = bisect.bisect_right(self.knots, t) - 1
        p, v, a = self.states[i]
        j = self.jerks[i]
        dt = t - self.knots[i]
        return (p + v * dt + a * dt * dt / 2.0 + j * dt ** 3 / 6.0,
                v + a * dt + j * dt * dt / 2.0,
                a + j * dt)

    def sample_array(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vectorized :meth:`sample` (t already clipped to [0, duration])."""
        knots = np.asarray(self.knots)
        st = np.asarray(self.states)
        jk = np.asarray(self.jerks + [0.0])
        i = np.clip(np.searchsorted(knots, t, side="right") - 1, 0, len(knots) - 1)
        p, v, a = st[i, 0], st[i, 1], st[i, 2]
        j = np.where(i < len(self.jerks), jk[i], 0.0)
        a = np.where(i < len(self.jerks), a, 0.0)
        dt = t - knots[i]
        return (p + v * dt + a * dt * dt / 2.0 + j * dt ** 3 / 6.0,
                v + a * dt + j * dt * dt / 2.0,
                a + j * dt)


def _ramp(v, a, vt, A, J):
    """Fastest jerk-limited change from velocity v (accel a) to vt with zero final accel.

    Works elementwise on numpy arrays. Returns (direction, t1, th, t3, peak accel,
    duration, displacement); jerk is +direction*J for t1, 0 for th, -direction*J for t3.
    """
    a = np.clip(a, -A, A)
    v_stop = v + a * np.abs(a) / (2.0 * J)
    s = np.where(vt >= v_stop, 1.0, -1.0)
    va, aa, dv = s * v, s * a, s * (vt - v)
    ap = np.sqrt(np.maximum((2.0 * J * dv + aa * aa) / 2.0, 0.0))
    ap = np.maximum(ap, aa)
    sat = ap > A
    ap = np.where(sat, A, ap)
    th = np.where(sat, (dv - (2.0 * A * A - aa * aa) / (2.0 * J)) / A, 0.0)
    th = np.maximum(th, 0.0)
    t1 = (ap - aa) / J
    t3 = ap / J
    # integrate in the positive frame
    d1 = va * t1 + aa * t1 ** 2 / 2.0 + J * t1 ** 3 / 6.0
    v1 = va + aa * t1 + J * t1 ** 2 / 2.0
    d2 = v1 * th + ap * th ** 2 / 2.0
    v2 = v1 + ap * th
    d3 = v2 * t3 + ap * t3 ** 2 / 2.0 - J * t3 ** 3 / 6.0
    return s, t1, th, t3, ap, t1 + th + t3, s * (d1 + d2 + d3)


def _ramp_scalar(v, a, vt, A, J):
    """Scalar twin of :func:`_ramp` (same arithmetic, no numpy overhead)."""
    a = min(max(a, -A), A)
    s = 1.0 if vt >= v + a * abs(a) / (2.0 * J) else -1.0
    va, aa, dv = s * v, s * a, s * (vt - v)
    ap = max(math.sqrt(max((2.0 * J * dv + aa * aa) / 2.0, 0.0)), aa)
    th = 0.0
    if ap > A:
        ap = A
        th = max((dv - (2.0 * A * A - aa * aa) / (2.0 * J)) / A, 0.0)
    t1 = (ap - aa) / J
    t3 = ap / J
    d1 = va * t1 + aa * t1 ** 2 / 2.0 + J * t1 ** 3 / 6.0
    v1 = va + aa * t1 + J * t1 ** 2 / 2.0
    d2 = v1 * th + ap * th ** 2 / 2.0
    v2 = v1 + ap * th
    d3 = v2 * t3 + ap * t3 ** 2 / 2.0 - J * t3 ** 3 / 6.0
    return s, t1, th, t3, t1 + th + t3, s * (d1 + d2 + d3)


_TINY = np.geomspace(1e-9, 1e-2, 8)
_UNIT_GRID = np.unique(np.concatenate([np.linspace(-1.0, 1.0, 65), _TINY, -_TINY]))
_UNIT_GRID = _UNIT_GRID[_UNIT_GRID != 0.0]


class _Axis:
    """One axis of one segment: all profiles accel-ramp / cruise / decel-ramp."""

    def __init__(self, d: float, v0: float, a0: float, v1: float, V: float, A: float, J: float):
        # sub-nanometre moves and sub-picometre/s speeds are noise; snapping them
        # keeps the root scan away from denormal arithmetic
        snap = lambda x, eps: 0.0 if abs(x) < eps else x
        d, v0, a0, v1 = snap(d, 1e-9), snap(v0, 1e-12), snap(a0, 1e-12), snap(v1, 1e-12)
        self.d, self.v0, self.a0, self.v1 = d, v0, min(max(a0, -A), A), v1
        self.V, self.A, self.J = V, A, J
        self.trivial = d == 0.0 and v0 == 0.0 and a0 == 0.0 and v1 == 0.0
        if self.trivial:
            self.t_opt = 0.0
            return
        self._scan()

    # -- evaluation helpers
    def _eval(self, vp):
        with np.errstate(divide="ignore", invalid="ignore"):
            _, _, _, _, _, Ta, Da = _ramp(self.v0, self.a0, vp, self.A, self.J)
            _, _, _, _, _, Tb, Db = _ramp(vp, 0.0, self.v1, self.A, self.J)
        return Ta + Tb, Da + Db

    def _eval_scalar(self, vp: float) -> tuple[float, float]:
        *_, Ta, Da = _ramp_scalar(self.v0, self.a0, vp, self.A, self.J)
        *_, Tb, Db = _ramp_scalar(vp, 0.0, self.v1, self.A, self.J)
        return Ta + Tb, Da + Db

    def _g(self, vp: float) -> float:
        return self._eval_scalar(vp)[1] - self.d

    def _T(self, vp: float) -> float:
        tr, D = self._eval_scalar(vp)
        return tr + (self.d - D) / vp

    def _creep(self, T: float) -> float | None:
        """Cruise speed below the grid for durations that need a very slow creep."""
        grid, Tg, feas = self.grid, self.T, self.feasible
        cand = np.nonzero(feas & (Tg < T))[0]
        if not len(cand):
            return None
        hi = float(grid[cand[np.argmin(np.abs(grid[cand]))]])
        for _ in range(40):
            lo = hi / 10.0
            tr, D = self._eval_scalar(lo)
            if (self.d - D) / lo < 0.0:
                return None
            if self._T(lo) >= T:
                return brentq(lambda x: self._T(x) - T, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps)
            hi = lo
        return None

    def _scan(self):
        V = self.V
        extra = np.clip(np.array([self.v0, self.v1]), -V, V)
        grid = np.unique(np.concatenate([V * _UNIT_GRID, extra[extra != 0.0]]))
        tr, D = self._eval(grid)
        g = D - self.d
        roots = []
        sign_change = np.nonzero((g[:-1] * g[1:] <= 0.0) & (np.sign(grid[:-1]) == np.sign(grid[1:])))[0]
        for i in sign_change:
            lo, hi = float(grid[i]), float(grid[i + 1])
            if g[i] == 0.0:
                roots.append(lo)
            elif g[i + 1] == 0.0:
                roots.append(hi)
            else:
                roots.append(brentq(self._g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))
        if roots:
            rs = np.array(roots)
            ev = [self._eval_scalar(r) for r in roots]
            order = np.argsort(np.concatenate([grid, rs]), kind="stable")
            grid = np.concatenate([grid, rs])[order]
            tr = np.concatenate([tr, [e[0] for e in ev]])[order]
            D = np.concatenate([D, [e[1] for e in ev]])[order]
        with np.errstate(divide="ignore", invalid="ignore"):
            tc = (self.d - D) / grid
        root_mask = np.isin(grid, np.array(roots)) if roots else np.zeros(grid.shape, bool)
        tc = np.where(root_mask, 0.0, tc)
        feasible = tc >= -1e-12
        self.grid, self.T = grid, tr + np.maximum(tc, 0.0)
        self.feasible = feasible
        tr0, D0 = self._eval_scalar(0.0)
        self.dwell_from = tr0 if abs(D0 - self.d) < 1e-12 else math.inf
        t_opt = float(np.min(self.T[feasible])) if feasible.any() else math.inf
        self.t_opt = min(t_opt, self.dwell_from)
        if not math.isfinite(self.t_opt):
            raise InfeasibleWaypointError("no feasible profile for axis")

    def intervals(self) -> list[tuple[float, float]]:
        """Durations this axis can be stretched to, as closed intervals."""
        if self.trivial:
            return [(0.0, math.inf)]
        out = []
        if math.isfinite(self.dwell_from):
            out.append((self.dwell_from, math.inf))
        grid, T, feas = self.grid.tolist(), self.T.tolist(), self.feasible.tolist()
        n = len(grid)
        i = 0
        while i < n:
            if not feas[i]:
                i += 1
                continue
            k = i
            while k + 1 < n and feas[k + 1] and (grid[k + 1] > 0) == (grid[i] > 0):
                k += 1
            lo, hi = min(T[i:k + 1]), max(T[i:k + 1])
            if min(abs(grid[i]), abs(grid[k])) <= self.V * 1e-9 * 1.0001:
                hi = math.inf
            out.append((lo, hi))
            i = k + 1
        return out

    def profile(self, T: float, p0: float) -> Profile1D | None:
        """Profile of exactly duration ``T`` (to ~1e-12), or None if T is blocked."""
        if self.trivial:
            return Profile1D(p0, 0.0, 0.0, [(T, 0.0)])
        if T >= self.dwell_from - 1e-12:
            return self._build(0.0, max(T - self.dwell_from, 0.0), p0)
        grid, Tg, feas = self.grid, self.T, self.feasible
        best = None
        exact = np.nonzero(feas & (np.abs(Tg - T) <= 1e-12))[0]
        if len(exact):
            best = float(grid[exact[np.argmax(np.abs(grid[exact]))]])
        else:
            h = Tg - T
            pair = (feas[:-1] & feas[1:] & (np.sign(grid[:-1]) == np.sign(grid[1:]))
                    & (h[:-1] * h[1:] < 0.0))
            idx = np.nonzero(pair)[0]
            if len(idx):
                # prefer the fastest cruise that meets the duration
                i = int(idx[np.argmax(np.abs(grid[idx]) + np.abs(grid[idx + 1]))])
                lo, hi = float(grid[i]), float(grid[i + 1])
                best = brentq(lambda x: self._T(x) - T, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
            else:
                best = self._creep(T)
        if best is None:
            return None
        tr, D = self._eval_scalar(best)
        tc = max((self.d - D) / best, 0.0)
        return self._build(best, tc, p0)

    def _build(self, vp: float, tc: float, p0: float) -> Profile1D:
        s, t1, th, t3, _, _ = _ramp_scalar(self.v0, self.a0, vp, self.A, self.J)
        s2, u1, uh, u3, _, _ = _ramp_scalar(vp, 0.0, self.v1, self.A, self.J)
        pieces = [(t1, s * self.J), (th, 0.0), (t3, -s * self.J), (tc, 0.0),
                  (u1, s2 * self.J), (uh, 0.0), (u3, -s2 * self.J)]
        return Profile1D(p0, self.v0, self.a0, pieces)


def _synchronize(axes: list[_Axis], p0s: list[float]) -> list[Profile1D]:
    t_star = max(ax.t_opt for ax in axes)
    ivs = [ax.intervals() for ax in axes]

    def ok(T):
        return all(any(lo - 1e-9 <= T <= hi + 1e-9 for lo, hi in iv) for iv in ivs)

    candidates = sorted({t_star} | {lo for iv in ivs for lo, _ in iv if lo > t_star})
    for T in candidates:
        if not ok(T):
            continue
        for bump in (0.0, 1e-9, 1e-6, 1e-4):
            Tb = T * (1.0 + bump) + bump
            profs = [ax.profile(Tb, p0) for ax, p0 in zip(axes, p0s)]
            if all(p is not None for p in profs):
                return profs
    raise InfeasibleWaypointError("axes could not be synchronized")


# ---------------------------------------------------------------------------
# budget split between the two translational axes


def _shares(m: tuple[float, float], u: tuple[float, float]) -> tuple[float, float] | None:
    """Largest c <= 1 with sum(max(m_i, c*u_i)^2) <= 1; returns the shares."""
    if m[0] ** 2 + m[1] ** 2 > 1.0 + 1e-12:
        return None

    def w(c):
        return max(m[0], c * u[0]), max(m[1], c * u[1])

    w1 = w(1.0)
    if w1[0] ** 2 + w1[1] ** 2 <= 1.0:
        return w1
    lo, hi = 0.0, 1.0
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        wm = w(mid)
        if wm[0] ** 2 + wm[1] ** 2 <= 1.0:
            lo = mid
        else:
            hi = mid
    return w(lo)


def _pick_frame(d, v0, a0, v1, lim: MotionLimits):
    """Choose rotation phi of the translational axes and their budget shares."""
    V, A, J = lim.v_max, lim.a_max, lim.j_max
    vectors = [d, v1, v0, a0, (v1[0] - v0[0], v1[1] - v0[1])]
    angles = []
    for vec in vectors:
        if math.hypot(*vec) > 1e-9:
            angles.append(math.atan2(vec[1], vec[0]))
    for p, q in ((v0, v1), (v0, (-v1[0], -v1[1]))):
        if math.hypot(*p) > 1e-9 and math.hypot(*q) > 1e-9:
            angles.append(math.atan2(p[1], p[0]) + 0.5 * wrap_angle(math.atan2(q[1], q[0]) - math.atan2(p[1], p[0])))
    angles.append(0.0)
    best = None
    for phi in angles:
        dd = rotate(d[0], d[1], -phi)
        vv0 = rotate(v0[0], v0[1], -phi)
        aa0 = rotate(a0[0], a0[1], -phi)
        vv1 = rotate(v1[0], v1[1], -phi)
        m = []
        for i in range(2):
            stop = vv0[i] + aa0[i] * abs(aa0[i]) / (2.0 * J)
            m.append(max(abs(vv0[i]) / V, abs(stop) / V, abs(vv1[i]) / V, abs(aa0[i]) / A))
        dn = math.hypot(*dd)
        if dn > 1e-12:
            u = (abs(dd[0]) / dn, abs(dd[1]) / dn)
        else:
            dv = (vv1[0] - vv0[0], vv1[1] - vv0[1])
            n = math.hypot(*dv)
            u = (abs(dv[0]) / n, abs(dv[1]) / n) if n > 1e-12 else (1.0, 0.0)
        w = _shares((m[0], m[1]), u)
        if w is None:
            continue
        score = min((w[i] / u[i]) if u[i] > 1e-12 else math.inf for i in range(2))
        if best is None or score > best[0] + 1e-12:
            best = (score, phi, w)
    if best is None:
        # boundary states cannot fit a box inside the speed disc; keep their needs
        phi = angles[0]
        vv0 = rotate(v0[0], v0[1], -phi)
        vv1 = rotate(v1[0], v1[1], -phi)
        aa0 = rotate(a0[0], a0[1], -phi)
        w = tuple(max(abs(vv0[i]) / V, abs(vv1[i]) / V, abs(aa0[i]) / A, 1e-3) for i in range(2))
        return phi, w
    return best[1], best[2]


# ---------------------------------------------------------------------------
# trajectories


@dataclass(frozen=True)
class _Segment:
    t_start: float
    duration: float
    phi: float
    origin: tuple[float, float]
    e1: Profile1D
    e2: Profile1D
    rot: Profile1D
    target: Waypoint


ACTIVE, CANCELLED, COMPLETE = "active", "cancelled", "complete"


@dataclass(frozen=True)
class Trajectory:
    start: MotionSetpoint
    segments: tuple[_Segment, ...]
    duration: float
    state: str = ACTIVE
    limits: MotionLimits = field(default_factory=MotionLimits)
    offset: float = 0.0  # time into `segments` that t=0 refers to

    @property
    def waypoints(self) -> list[Waypoint]:
        return [s.target for s in self.segments]

    def remaining(self, t: float) -> list[Waypoint]:
        tt = t + self.offset
        return [s.target for s in self.segments if s.t_start + s.duration > tt + 1e-12]

    def is_complete(self, t: float) -> bool:
        return t >= self.duration

    def final(self) -> MotionSetpoint:
        if not self.segments:
            return MotionSetpoint(self.start.position, self.start.velocity)
        w = self.segments[-1].target
        return MotionSetpoint(w.position, w.velocity)


def _segment(t0: float, s: MotionSetpoint, wp: Waypoint, lim: MotionLimits) -> _Segment:
    p, v, a = s.position, s.velocity, s.acceleration
    d = (wp.position.x - p.x, wp.position.y - p.y)
    phi, (w1, w2) = _pick_frame(d, (v.vx, v.vy), (a.vx, a.vy), (wp.velocity.vx, wp.velocity.vy), lim)
    dd = rotate(d[0], d[1], -phi)
    vv0 = rotate(v.vx, v.vy, -phi)
    aa0 = rotate(a.vx, a.vy, -phi)
    vv1 = rotate(wp.velocity.vx, wp.velocity.vy, -phi)
    axes = [
        _Axis(dd[0], vv0[0], aa0[0], vv1[0], lim.v_max * w1, lim.a_max * w1, lim.j_max),
        _Axis(dd[1], vv0[1], aa0[1], vv1[1], lim.v_max * w2, lim.a_max * w2, lim.j_max),
        _Axis(wrap_angle(wp.position.theta - p.theta), v.omega, a.omega, wp.velocity.omega,
              lim.omega_max, lim.alpha_max, lim.rot_jerk_max),
    ]
    e1, e2, rot = _synchronize(axes, [0.0, 0.0, p.theta])
    T = max(e1.duration, e2.duration, rot.duration)
    return _Segment(t0, T, phi, (p.x, p.y), e1, e2, rot, wp)


def _check(path: Sequence[Waypoint], lim: MotionLimits):
    for i, wp in enumerate(path):
        vals = (*wp.position, *wp.velocity)
        if not all(math.isfinite(x) for x in vals):
            raise InfeasibleWaypointError(f"waypoint {i} is not finite")
        if wp.velocity.speed > lim.v_max * (1 + 1e-12):
            raise InfeasibleWaypointError(
                f"waypoint {i} speed {wp.velocity.speed:.3f} exceeds v_max {lim.v_max}")
        if abs(wp.velocity.omega) > lim.omega_max:
            raise InfeasibleWaypointError(f"waypoint {i} angular rate exceeds omega_max")


def plan(start: MotionSetpoint, path: Sequence[Waypoint], limits: MotionLimits = MotionLimits()) -> Trajectory:
    """Plan a trajectory from ``start`` through every waypoint of ``path``."""
    _check(path, limits)
    if start.velocity.speed > limits.v_max * (1 + 1e-9):
        raise InfeasibleWaypointError("start velocity exceeds v_max")
    segs = []
    t = 0.0
    state = MotionSetpoint(start.position.wrapped(), start.velocity, start.acceleration)
    for wp in path:
        seg = _segment(t, state, wp, limits)
        segs.append(seg)
        t += seg.duration
        state = MotionSetpoint(wp.position, wp.velocity)
    return Trajectory(start, tuple(segs), t, ACTIVE if segs else COMPLETE, limits)


def _eval_segment(seg: _Segment, tau: float) -> MotionSetpoint:
    p1, v1, a1 = seg.e1.sample(min(tau, seg.e1.duration))
    p2, v2, a2 = seg.e2.sample(min(tau, seg.e2.duration))
    th, om, al = seg.rot.sample(min(tau, seg.rot.duration))
    c, s = math.cos(seg.phi), math.sin(seg.phi)
    return MotionSetpoint(
        Pose2D(seg.origin[0] + c * p1 - s * p2, seg.origin[1] + s * p1 + c * p2, wrap_angle(th)),
        Twist2D(c * v1 - s * v2, s * v1 + c * v2, om),
        Twist2D(c * a1 - s * a2, s * a1 + c * a2, al),
    )


def sample(traj: Trajectory, t: float) -> MotionSetpoint:
    """Setpoint at time ``t`` (seconds since the trajectory started)."""
    tt = max(t, 0.0) + traj.offset
    if not traj.segments:
        return traj.start if t <= 0.0 else MotionSetpoint(traj.start.position, traj.start.velocity)
    if t >= traj.duration:
        return traj.final()
    starts = [s.t_start for s in traj.segments]
    i = max(bisect.bisect_right(starts, tt) - 1, 0)
    seg = traj.segments[i]
    tau = tt - seg.t_start
    if tau >= seg.duration:
        w = seg.target
        return MotionSetpoint(w.position, w.velocity)
    return _eval_segment(seg, tau)


def sample_array(traj: Trajectory, ts) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Setpoints at many times at once: (pose, velocity, acceleration), each shape (n, 3).

    Agrees with :func:`sample` to rounding; meant for analysis and plotting.
    """
    ts = np.asarray(ts, dtype=float)
    n = ts.shape[0]
    pos, vel, acc = np.zeros((n, 3)), np.zeros((n, 3)), np.zeros((n, 3))
    fin = traj.final()
    done = ts >= traj.duration
    pos[done] = fin.position
    vel[done] = fin.velocity
    if not traj.segments:
        pos[:] = traj.start.position
        vel[~done] = traj.start.velocity
        return pos, vel, acc
    tt = np.maximum(ts, 0.0) + traj.offset
    starts = np.array([s.t_start for s in traj.segments])
    idx = np.maximum(np.searchsorted(starts, tt, side="right") - 1, 0)
    for k, seg in enumerate(traj.segments):
        m = (idx == k) & ~done
        if not m.any():
            continue
        tau = tt[m] - seg.t_start
        p1, v1, a1 = seg.e1.sample_array(np.minimum(tau, seg.e1.duration))
        p2, v2, a2 = seg.e2.sample_array(np.minimum(tau, seg.e2.duration))
        th, om, al = seg.rot.sample_array(np.minimum(tau, seg.rot.duration))
        # past a profile's end only position persists (mirrors Profile1D.sample)
        v1, a1 = np.where(tau >= seg.e1.duration, seg.e1.end_state()[1], v1), np.where(tau >= seg.e1.duration, 0.0, a1)
        v2, a2 = np.where(tau >= seg.e2.duration, seg.e2.end_state()[1], v2), np.where(tau >= seg.e2.duration, 0.0, a2)
        om, al = np.where(tau >= seg.rot.duration, seg.rot.end_state()[1], om), np.where(tau >= seg.rot.duration, 0.0, al)
        c, sn = math.cos(seg.phi), math.sin(seg.phi)
        past = tau >= seg.duration
        pos[m] = np.column_stack([seg.origin[0] + c * p1 - sn * p2, seg.origin[1] + sn * p1 + c * p2,
                                  np.remainder(th + np.pi, 2 * np.pi) - np.pi])
        vel[m] = np.column_stack([c * v1 - sn * v2, sn * v1 + c * v2, om])
        acc[m] = np.column_stack([c * a1 - sn * a2, sn * a1 + c * a2, al])
        if past.any():
            w = seg.target
            rows = np.nonzero(m)[0][past]
            pos[rows], vel[rows], acc[rows] = w.position, w.velocity, 0.0
    # keep theta in (-pi, pi]
    pos[:, 2] = np.where(pos[:, 2] <= -np.pi, pos[:, 2] + 2 * np.pi, pos[:, 2])
    return pos, vel, acc


def cancel(traj: Trajectory, t: float) -> Trajectory:
    """Brake to rest at maximum deceleration from the state at ``t``."""
    s = sample(traj, t)
    lim = traj.limits
    p, v = s.position, s.velocity
    speed = v.speed
    if speed < 1e-12 and abs(v.omega) < 1e-12:
        rest = MotionSetpoint(p)
        return Trajectory(rest, (), 0.0, COMPLETE, lim)
    phi = math.atan2(v.vy, v.vx) if speed >= 1e-12 else 0.0
    tb = speed / lim.a_max
    e1 = Profile1D(0.0, speed, -lim.a_max if speed >= 1e-12 else 0.0, [(tb, 0.0)])
    e2 = Profile1D(0.0, 0.0, 0.0, [])
    sw = math.copysign(1.0, v.omega)
    tr = abs(v.omega) / lim.alpha_max
    rot = Profile1D(p.theta, v.omega, -sw * lim.alpha_max if tr > 0 else 0.0, [(tr, 0.0)])
    T = max(tb, tr)
    # the braking endpoint becomes the implicit final waypoint
    pe1 = e1.end_state()[0]
    pth = rot.end_state()[0]
    c, sn = math.cos(phi), math.sin(phi)
    end = Pose2D(p.x + c * pe1, p.y + sn * pe1, wrap_angle(pth))
    seg = _Segment(0.0, T, phi, (p.x, p.y), e1, e2, rot, Waypoint(end))
    start = MotionSetpoint(p, v, Twist2D(-c * lim.a_max if speed >= 1e-12 else 0.0,
                                         -sn * lim.a_max if speed >= 1e-12 else 0.0,
                                         -sw * lim.alpha_max if tr > 0 else 0.0))
    return Trajectory(start, (seg,), T, CANCELLED, lim)


def replace(traj: Trajectory, t: float, new_path: Sequence[Waypoint],
            limits: MotionLimits | None = None) -> Trajectory:
    """Re-plan from the state at ``t`` toward ``new_path``.

    Replacing with exactly the remaining waypoints keeps the current profile.
    """
    lim = limits or traj.limits
    _check(new_path, lim)
    if lim == traj.limits and list(new_path) == traj.remaining(t) and traj.state == ACTIVE:
        off = traj.offset + t
        return Trajectory(sample(traj, t), traj.segments, max(traj.duration - t, 0.0),
                          ACTIVE, traj.limits, off)
    return plan(sample(traj, t), new_path, lim)
