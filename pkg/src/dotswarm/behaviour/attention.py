"""Carrier attention: lock onto one carrier ID for a while and ignore the rest."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from ..sensing import FiducialDetection


@dataclass
class CarrierAttention:
    lock_time: float = 3.0
    locked_id: int | None = None
    lock_expiry: float = -math.inf
    blacklist: dict[int, float] = field(default_factory=dict)  # id -> ignored until

    def ignore(self, carrier_id: int, until: float) -> None:
        self.blacklist[carrier_id] = max(until, self.blacklist.get(carrier_id, -math.inf))
        if self.locked_id == carrier_id:
            self.release()

    def release(self) -> None:
        self.locked_id = None
        self.lock_expiry = -math.inf

    def is_locked(self, now: float) -> bool:
        return self.locked_id is not None and now < self.lock_expiry

    def filter(self, detections: Sequence[FiducialDetection], now: float, acquire: bool = True,
               prefer: int | None = None) -> list[FiducialDetection]:
        """Detections that pass the lock; may acquire a new lock on the closest ID.

        ``prefer`` wins a fresh acquisition whenever it is among the candidates.
        """
        if not self.is_locked(now):
            self.release()
            cands = [d for d in detections if self.blacklist.get(d.carrier_id, -math.inf) <= now]
            if not cands or not acquire:
                return []
            ids = {d.carrier_id for d in cands}
            if prefer is not None and prefer in ids:
                pick = prefer
            else:
                pick = min(cands, key=lambda d: (math.hypot(d.pose_in_base_link.x, d.pose_in_base_link.y),
                                                 d.carrier_id)).carrier_id
            self.locked_id = pick
            self.lock_expiry = now + self.lock_time
        return [d for d in detections if d.carrier_id == self.locked_id]
