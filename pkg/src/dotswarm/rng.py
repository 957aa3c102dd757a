"""Named, independent random streams derived from one master seed.

A stream is keyed by (robot index, purpose) so adding a robot or a new consumer
never perturbs the draws of any existing stream.
"""

from __future__ import annotations

import zlib

import numpy as np

WORLD = -1  # robot index used for world-level streams (spawn, bus)


def stream(seed: int, robot: int, purpose: str) -> np.random.Generator:
    key = (robot + 1, zlib.crc32(purpose.encode()))
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


class RngStreams:
    """Lazily created streams for one trial."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._cache: dict[tuple[int, str], np.random.Generator] = {}

    def get(self, robot: int, purpose: str) -> np.random.Generator:
        k = (robot, purpose)
        if k not in self._cache:
            self._cache[k] = stream(self.seed, robot, purpose)
        return self._cache[k]
