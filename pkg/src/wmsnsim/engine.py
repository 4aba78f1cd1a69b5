"""Discrete-event engine and reproducible random streams."""

from __future__ import annotations

import hashlib
import heapq
import itertools
import math
from typing import Any, Callable

import numpy as np


class SchedulingError(ValueError):
    """Raised when an event is scheduled before the current clock."""


class SimEvent:
    """A scheduled callback. Ordered by ``(time, sequence)``."""

    __slots__ = ("time", "sequence", "target", "kind", "action", "args", "cancelled")

    def __init__(self, time, sequence, target, kind, action, args):
        self.time = time
        self.sequence = sequence
        self.target = target
        self.kind = kind
        self.action = action
        self.args = args
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True

    def __repr__(self) -> str:
        return f"SimEvent(t={self.time!r}, seq={self.sequence}, kind={self.kind!r}, target={self.target!r})"


class Simulator:
    """Single-threaded event loop.

    Events at equal times are dispatched in the order they were scheduled.
    """

    def __init__(self) -> None:
        self.now = 0.0
        self._queue: list[tuple[float, int, SimEvent]] = []
        self._seq = itertools.count(1)
        self.dispatched = 0
        self.observer: Callable[[SimEvent], None] | None = None

    def schedule(
        self,
        time: float,
        action: Callable[..., Any] | None = None,
        *args: Any,
        target: Any = None,
        kind: str = "timer",
    ) -> SimEvent:
        if not time >= self.now:
            raise SchedulingError(f"cannot schedule {kind!r} at t={time!r}: clock is at {self.now!r}")
        ev = SimEvent(time, next(self._seq), target, kind, action, args)
        heapq.heappush(self._queue, (time, ev.sequence, ev))
        return ev

    def schedule_in(self, delay: float, action=None, *args, target=None, kind="timer") -> SimEvent:
        return self.schedule(self.now + delay, action, *args, target=target, kind=kind)

    def pending(self) -> int:
        return sum(1 for _, _, ev in self._queue if not ev.cancelled)

    def peek_time(self) -> float:
        return self._queue[0][0] if self._queue else math.inf

    def step(self) -> SimEvent | None:
        """Dispatch the next live event, or return None if the queue is empty."""
        queue = self._queue
        while queue:
            t, _, ev = heapq.heappop(queue)
            if ev.cancelled:
                continue
            self.now = t
            self.dispatched += 1
            if self.observer is not None:
                self.observer(ev)
            if ev.action is not None:
                ev.action(*ev.args)
            return ev
        return None

    def run_until(self, t_end: float) -> int:
        """Dispatch every event with ``time <= t_end`` and leave the clock at ``t_end``."""
        if t_end < self.now:
            raise SchedulingError(f"run_until({t_end!r}) is before the clock ({self.now!r})")
        queue = self._queue
        observer = self.observer
        count = 0
        while queue and queue[0][0] <= t_end:
            t, _, ev = heapq.heappop(queue)
            if ev.cancelled:
                continue
            self.now = t
            count += 1
            if observer is not None:
                observer(ev)
            if ev.action is not None:
                ev.action(*ev.args)
        self.dispatched += count
        self.now = t_end
        return count


def _label_key(label: str) -> int:
    # stable across processes, unlike hash()
    return int.from_bytes(hashlib.sha256(label.encode("utf-8")).digest()[:8], "little")


class RngStream:
    """Named random substream derived from a master seed.

    The stream depends only on ``(master_seed, label)``, so adding draws to
    one subsystem never perturbs another.
    """

    def __init__(self, master_seed: int, label: str):
        self.master_seed = int(master_seed)
        self.label = label
        seq = np.random.SeedSequence(self.master_seed & (2**64 - 1), spawn_key=(_label_key(label),))
        self.generator = np.random.Generator(np.random.PCG64(seq))

    def uniform01(self) -> float:
        return float(self.generator.random())

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * float(self.generator.random())

    def gaussian(self, mean: float = 0.0, sigma: float = 1.0) -> float:
        if sigma < 0:
            raise ValueError("sigma must be non-negative")
        if sigma == 0:
            return float(mean)
        return float(self.generator.normal(mean, sigma))

    def draw(self, kind: str, *params: float) -> float:
        if kind == "uniform01":
            return self.uniform01()
        if kind == "gaussian":
            return self.gaussian(*params)
        raise ValueError(f"unknown draw kind {kind!r}")

    def __repr__(self) -> str:
        return f"RngStream({self.master_seed}, {self.label!r})"
