"""Topic bus between controllers and (simulated) robot hardware.

Pull-based: publishers stamp messages with a delivery time; subscribers poll
for everything due. Intra-robot topics (``robot_<k>/...``) are reliable and
private to robot k. Global topics are best effort and may drop messages.
"""

from __future__ import annotations

import heapq
import json
import re
from dataclasses import dataclass
from typing import Any, NamedTuple

import numpy as np


@dataclass(frozen=True)
class QoS:
    reliable: bool = True
    drop_prob: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.drop_prob <= 1.0:
            raise ValueError("drop_prob must lie in [0, 1]")
        if self.reliable and self.drop_prob != 0.0:
            raise ValueError("reliable topics cannot drop")

    def describe(self) -> str:
        return "RELIABLE" if self.reliable else f"BEST_EFFORT({self.drop_prob:g})"


RELIABLE = QoS()


def best_effort(drop_prob: float = 0.05) -> QoS:
    return QoS(False, drop_prob)


class UnknownTopicError(KeyError):
    pass


class NamespaceError(PermissionError):
    pass


_NS = re.compile(r"^robot_(\d+)/")


def namespace_of(topic: str) -> int | None:
    m = _NS.match(topic)
    return int(m.group(1)) if m else None


def robot_topic(robot: int, name: str) -> str:
    return f"robot_{robot}/{name}"


@dataclass(frozen=True)
class Topic:
    name: str
    type_tag: str
    qos: QoS


class Envelope(NamedTuple):
    topic: str
    emitted: float
    delivered: float
    publisher: str
    payload: Any


class Subscription:
    def __init__(self, bus: Bus, topic: str, owner: str | None):
        self.bus, self.topic, self.owner = bus, topic, owner
        self._heap: list[tuple[float, int, Envelope]] = []

    def poll(self, now: float) -> list[Any]:
        return [e.payload for e in self.poll_envelopes(now)]

    def poll_envelopes(self, now: float) -> list[Envelope]:
        out = []
        h = self._heap
        while h and h[0][0] <= now:
            out.append(heapq.heappop(h)[2])
        return out

    def pending(self) -> int:
        return len(self._heap)


class Bus:
    def __init__(self, rng: np.random.Generator | None = None):
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.topics: dict[str, Topic] = {}
        self._subs: dict[str, list[Subscription]] = {}
        self._last: dict[tuple[str, str], float] = {}
        self._seq = 0

    def register(self, name: str, type_tag: str, qos: QoS | None = None) -> Topic:
        ns = namespace_of(name)
        if qos is None:
            qos = RELIABLE if ns is not None else best_effort()
        if ns is not None and not qos.reliable:
            raise ValueError(f"intra-robot topic {name!r} must be RELIABLE")
        if ns is None and qos.reliable:
            raise ValueError(f"inter-robot topic {name!r} must be BEST_EFFORT")
        t = Topic(name, type_tag, qos)
        old = self.topics.get(name)
        if old is not None and old != t:
            raise ValueError(f"topic {name!r} already registered as {old}")
        self.topics[name] = t
        self._subs.setdefault(name, [])
        return t

    def subscribe(self, topic: str, robot: int | None = None) -> Subscription:
        """Subscribe on behalf of ``robot`` (None means the simulator itself)."""
        if topic not in self.topics:
            raise UnknownTopicError(topic)
        ns = namespace_of(topic)
        if robot is not None and ns is not None and ns != robot:
            raise NamespaceError(f"robot {robot} may not subscribe to {topic!r}")
        s = Subscription(self, topic, None if robot is None else f"robot_{robot}")
        self._subs[topic].append(s)
        return s

    def publish(self, topic: str, payload: Any, now: float, publisher: str = "",
                deliver_at: float | None = None) -> bool:
        """Queue ``payload`` for every subscriber; returns False if dropped."""
        t = self.topics.get(topic)
        if t is None:
            raise UnknownTopicError(topic)
        if not t.qos.reliable and t.qos.drop_prob > 0.0:
            if float(self.rng.random()) < t.qos.drop_prob:
                return False
        due = now if deliver_at is None else max(deliver_at, now)
        key = (topic, publisher)
        due = max(due, self._last.get(key, due))  # per-publisher FIFO
        self._last[key] = due
        env = Envelope(topic, now, due, publisher, payload)
        for s in self._subs[topic]:
            heapq.heappush(s._heap, (due, self._seq, env))
        self._seq += 1
        return True

    def dump_topics(self) -> str:
        rows = [{"topic": t.name, "type": t.type_tag, "qos": t.qos.describe()}
                for t in sorted(self.topics.values(), key=lambda t: t.name)]
        return json.dumps(rows, indent=1)


def publish(bus: Bus, topic: str, payload: Any, now: float, publisher: str = "") -> bool:
    return bus.publish(topic, payload, now, publisher)


def subscribe(bus: Bus, topic: str, robot: int | None = None) -> Subscription:
    return bus.subscribe(topic, robot)


def poll(handle: Subscription, now: float) -> list[Any]:
    return handle.poll(now)
