"""Minimal reactive behaviour-tree runtime: sequence, selector and leaves."""

from __future__ import annotations

from enum import Enum
from typing import Callable, Iterable


class Status(Enum):
    SUCCESS = "success"
    FAILURE = "failure"
    RUNNING = "running"


class MalformedTreeError(ValueError):
    pass


class BTNode:
    kind = "node"

    def __init__(self, name: str | None = None):
        self.name = name or type(self).__name__
        self.last_status: Status | None = None
        self.last_tick = -1

    def tick(self, bb) -> Status:
        tick_no = getattr(bb, "tick", None)
        fresh = tick_no is None or self.last_tick != tick_no - 1 or self.last_status is not Status.RUNNING
        st = self.update(bb, fresh)
        if not isinstance(st, Status):
            raise TypeError(f"{self.name} returned {st!r}, not a Status")
        self.last_status = st
        self.last_tick = tick_no if tick_no is not None else self.last_tick + 1
        return st

    def update(self, bb, entered: bool) -> Status:
        """Leaf logic; ``entered`` is True when the node was not RUNNING on the previous tick."""
        raise NotImplementedError


class Composite(BTNode):
    def __init__(self, children: Iterable[BTNode], name: str | None = None):
        super().__init__(name)
        if not children:
            raise MalformedTreeError(f"{self.kind} {self.name!r} has no children")
        self.children = list(children)


class Sequence_(Composite):
    """Returns the first non-SUCCESS child status (SUCCESS if all succeed)."""

    kind = "sequence"

    def update(self, bb, entered):
        for c in self.children:
            st = c.tick(bb)
            if st is not Status.SUCCESS:
                return st
        return Status.SUCCESS


class Selector(Composite):
    """Returns the first non-FAILURE child status (FAILURE if all fail)."""

    kind = "selector"

    def update(self, bb, entered):
        for c in self.children:
            st = c.tick(bb)
            if st is not Status.FAILURE:
                return st
        return Status.FAILURE


class Action(BTNode):
    kind = "action"

    def __init__(self, fn: Callable[..., Status], name: str | None = None):
        super().__init__(name or getattr(fn, "__name__", None))
        self.fn = fn

    def update(self, bb, entered):
        return self.fn(bb)


class Condition(BTNode):
    kind = "condition"

    def __init__(self, pred: Callable[..., bool], name: str | None = None):
        super().__init__(name or getattr(pred, "__name__", None))
        self.pred = pred

    def update(self, bb, entered):
        return Status.SUCCESS if self.pred(bb) else Status.FAILURE


Sequence = Sequence_


def tick(root: BTNode, bb) -> Status:
    """Tick the whole tree once from the root."""
    return root.tick(bb)
