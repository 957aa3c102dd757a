"""Robot-relative decaying obstacle map.

Each cell holds a collision likelihood M in [0, 1]. Every sensor update the map
decays and absorbs a Gaussian splat of the new returns::

    S(x, y)      = sum_i exp(-r_i^2 / (2 sigma^2))
    M'(x, y)     = min(M(x, y) * (1 - lambda * dt) + S(x, y), 1)

The grid axes are parallel to the odom frame. Its centre cell follows the robot
in whole-cell steps, so cell centres always sit on the global lattice
``k * resolution`` and recentring never resamples.
"""

from __future__ import annotations

import json
import math
from typing import BinaryIO, Iterable, NamedTuple, Sequence

import numpy as np

from .geometry import Twist2D


class SensorReturnPoint(NamedTuple):
    x: float
    y: float


class CollisionGrid:
    """161 x 161 cells of 25 mm, covering +/-2 m around the robot by default."""

    def __init__(self, resolution: float = 0.025, half_cells: int = 80,
                 decay: float = 1.0, sigma: float = 0.025, truncate: float = 4.0):
        self.resolution = float(resolution)
        self.half = int(half_cells)
        self.n = 2 * self.half + 1
        self.decay = float(decay)
        self.sigma = float(sigma)
        self.truncate = float(truncate)
        self.cells = np.zeros((self.n, self.n))  # [row = y, col = x]
        self.center = (0, 0)  # global lattice index of the central cell
        self.robot = (0.0, 0.0)
        k = int(math.ceil(self.truncate * self.sigma / self.resolution))
        self._win = np.arange(-k, k + 1)

    @property
    def extent(self) -> float:
        return self.half * self.resolution

    # -- lattice helpers
    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Odom-frame x (columns) and y (rows) of cell centres."""
        r = self.resolution
        gx = (self.center[0] + np.arange(-self.half, self.half + 1)) * r
        gy = (self.center[1] + np.arange(-self.half, self.half + 1)) * r
        return gx, gy

    def recenter(self, x: float, y: float) -> None:
        """Track the robot at odom position (x, y), shifting by whole cells."""
        self.robot = (float(x), float(y))
        cx = int(round(x / self.resolution))
        cy = int(round(y / self.resolution))
        self.shift(cx - self.center[0], cy - self.center[1])

    def shift(self, dx: int, dy: int) -> None:
        """Move the centre by (dx, dy) cells; cells leaving are dropped, new ones are 0."""
        if dx == 0 and dy == 0:
            return
        n = self.n
        out = np.zeros_like(self.cells)
        if abs(dx) < n and abs(dy) < n:
            src_r = slice(max(dy, 0), n + min(dy, 0))
            dst_r = slice(max(-dy, 0), n + min(-dy, 0))
            src_c = slice(max(dx, 0), n + min(dx, 0))
            dst_c = slice(max(-dx, 0), n + min(-dx, 0))
            out[dst_r, dst_c] = self.cells[src_r, src_c]
        self.cells = out
        self.center = (self.center[0] + dx, self.center[1] + dy)

    # -- update
    def _splat_terms(self, returns) -> tuple[np.ndarray, np.ndarray]:
        """Flat cell indices and Gaussian weights of every (return, cell) pair in range."""
        pts = np.asarray(returns, dtype=float).reshape(-1, 2)
        if len(pts) == 0:
            return np.empty(0, np.int64), np.empty(0)
        r = self.resolution
        cut2 = (self.truncate * self.sigma) ** 2
        w = self._win
        gx = np.rint(pts[:, 0] / r).astype(np.int64)[:, None, None] + w[None, None, :]
        gy = np.rint(pts[:, 1] / r).astype(np.int64)[:, None, None] + w[None, :, None]
        dx = gx * r - pts[:, 0, None, None]
        dy = gy * r - pts[:, 1, None, None]
        d2 = dx * dx + dy * dy
        col = gx - (self.center[0] - self.half)
        row = gy - (self.center[1] - self.half)
        keep = d2 <= cut2
        keep &= (col >= 0) & (col < self.n)
        keep &= (row >= 0) & (row < self.n)
        flat = (row * self.n + col)[keep]
        return flat, np.exp(d2[keep] * (-0.5 / self.sigma ** 2))

    def splat(self, returns: Iterable[Sequence[float]]) -> np.ndarray:
        """S(x, y) for a batch of returns, truncated at ``truncate * sigma``."""
        flat, vals = self._splat_terms(list(returns))
        S = np.zeros(self.n * self.n)
        np.add.at(S, flat, vals)
        return S.reshape(self.n, self.n)

    def step(self, returns: Iterable[Sequence[float]], dt: float) -> CollisionGrid:
        """Decay by (1 - lambda dt), add the splat of ``returns``, clamp at 1."""
        k = self.decay * dt
        if not 0.0 < k < 1.0:
            raise ValueError(f"need 0 < lambda*dt < 1, got {k}")
        self.cells *= 1.0 - k
        if not isinstance(returns, np.ndarray):
            returns = list(returns)
        flat, vals = self._splat_terms(returns)
        if len(flat):
            # only touched cells can exceed 1 after decay
            cells = self.cells.reshape(-1)
            np.add.at(cells, flat, vals)
            cells[flat] = np.minimum(cells[flat], 1.0)
        return self

    # -- queries
    def _disc(self, cx: float, cy: float, radius: float) -> np.ndarray:
        """Values of in-grid cells whose centres lie within ``radius`` of (cx, cy)."""
        r = self.resolution
        lo_c = max(int(math.floor((cx - radius) / r)) - self.center[0] + self.half, 0)
        hi_c = min(int(math.ceil((cx + radius) / r)) - self.center[0] + self.half, self.n - 1)
        lo_r = max(int(math.floor((cy - radius) / r)) - self.center[1] + self.half, 0)
        hi_r = min(int(math.ceil((cy + radius) / r)) - self.center[1] + self.half, self.n - 1)
        if lo_c > hi_c or lo_r > hi_r:
            return np.empty(0)
        xs = (np.arange(lo_c, hi_c + 1) - self.half + self.center[0]) * r
        ys = (np.arange(lo_r, hi_r + 1) - self.half + self.center[1]) * r
        inside = (xs[None, :] - cx) ** 2 + (ys[:, None] - cy) ** 2 <= radius * radius
        return self.cells[lo_r:hi_r + 1, lo_c:hi_c + 1][inside]

    def predict_collision(self, velocity: Twist2D, lookahead: float = 0.7, radius: float = 0.18) -> float:
        """Mean cell value over a disc at the robot's position projected ``lookahead`` ahead.

        ``velocity`` is in the grid (odom-aligned) frame. A disc with no cells
        inside the grid counts as certain collision.
        """
        if not radius > 0:
            raise ValueError("radius must be positive")
        cx = self.robot[0] + velocity[0] * lookahead
        cy = self.robot[1] + velocity[1] * lookahead
        vals = self._disc(cx, cy, radius)
        if vals.size == 0:
            return 1.0
        return math.fsum(vals.tolist()) / vals.size

    def direction_costs(self, headings: Sequence[float], reach: float = 0.3,
                        radius: float = 0.18) -> list[float]:
        costs = []
        for h in headings:
            vals = self._disc(self.robot[0] + reach * math.cos(h), self.robot[1] + reach * math.sin(h), radius)
            costs.append(math.fsum(vals.tolist()))
        return costs

    def least_worst_direction(self, candidates: int | Sequence[float] = 16,
                              reach: float = 0.3, radius: float = 0.18) -> float:
        """Heading whose nearby disc holds the least total likelihood (first wins ties)."""
        headings = candidate_headings(candidates)
        costs = self.direction_costs(headings, reach, radius)
        return headings[int(np.argmin(costs))]

    # -- debug dumps
    def dump(self, fh: BinaryIO, timestamp: float | None = None) -> None:
        """Write a JSON header line and the cells row-major as uint8 (value * 255)."""
        head = {"resolution": self.resolution, "cells": self.n, "extent": self.extent,
                "origin": [(self.center[0] - self.half) * self.resolution,
                           (self.center[1] - self.half) * self.resolution],
                "dtype": "uint8", "scale": 255, "time": timestamp}
        fh.write(json.dumps(head, sort_keys=True).encode() + b"\n")
        fh.write(np.rint(self.cells * 255.0).astype(np.uint8).tobytes(order="C"))


def candidate_headings(candidates: int | Sequence[float]) -> list[float]:
    if isinstance(candidates, int):
        if candidates < 1:
            raise ValueError("need at least one candidate heading")
        return [2.0 * math.pi * k / candidates for k in range(candidates)]
    headings = [float(h) for h in candidates]
    if not headings:
        raise ValueError("need at least one candidate heading")
    return headings


def step(grid: CollisionGrid, returns, dt: float) -> CollisionGrid:
    return grid.step(returns, dt)


def predict_collision(grid: CollisionGrid, velocity: Twist2D, lookahead: float = 0.7,
                      radius: float = 0.18) -> float:
    return grid.predict_collision(velocity, lookahead, radius)


def least_worst_direction(grid: CollisionGrid, candidates: int | Sequence[float] = 16) -> float:
    return grid.least_worst_direction(candidates)
