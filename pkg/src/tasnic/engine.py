"""Deterministic discrete-event engine.

All simulation time is integer nanoseconds of "true" (oracle) time.  Events
firing at the same instant are processed in insertion order, which makes any
run with a fixed seed bit-for-bit reproducible.  Per-component random streams
are derived from (seed, stream name) so that adding a component never
perturbs the draws seen by another.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from dataclasses import dataclass
from typing import Callable

SimTime = int  # integer nanoseconds of true time

TICKS_PER_US = 1_000
TICKS_PER_MS = 1_000_000
TICKS_PER_S = 1_000_000_000


class SchedulingError(Exception):
    """Raised when an event is scheduled in the past (a logic bug)."""


@dataclass(slots=True)
class EventHandle:
    """Cancellation token for a scheduled event."""

    fire_at: SimTime
    seq: int
    cancelled: bool = False

    def cancel(self) -> None:
        self.cancelled = True


@dataclass(slots=True, frozen=True)
class RunStats:
    events_processed: int
    final_time: SimTime


@dataclass(slots=True)
class _Event:
    fire_at: SimTime
    seq: int
    action: Callable[[], None]
    label: str
    handle: EventHandle

    def __lt__(self, other: "_Event") -> bool:
        if self.fire_at != other.fire_at:
            return self.fire_at < other.fire_at
        return self.seq < other.seq


class Simulator:
    """Single-threaded event queue with monotone integer-ns time.

    ``trace_hook``, when set, is called with ``(fire_at, seq, label)`` for
    every processed event; tests use it to hash whole event traces.
    """

    def __init__(self, trace_hook: Callable[[SimTime, int, str], None] | None = None):
        self.now: SimTime = 0
        self.events_processed = 0
        self.trace_hook = trace_hook
        self._heap: list[_Event] = []
        self._seq = 0

    def at(self, when: SimTime, action: Callable[[], None], label: str = "") -> EventHandle:
        """Schedule ``action`` at absolute time ``when`` (>= now)."""
        if when < self.now:
            raise SchedulingError(f"scheduling at t={when} in the past (now={self.now})")
        handle = EventHandle(when, self._seq)
        heapq.heappush(self._heap, _Event(when, self._seq, action, label, handle))
        self._seq += 1
        return handle

    def after(self, delay: SimTime, action: Callable[[], None], label: str = "") -> EventHandle:
        if delay < 0:
            raise SchedulingError(f"negative delay {delay}")
        return self.at(self.now + delay, action, label)

    def peek_time(self) -> SimTime | None:
        """Time of the next live event, or None when the queue is empty."""
        while self._heap and self._heap[0].handle.cancelled:
            heapq.heappop(self._heap)
        return self._heap[0].fire_at if self._heap else None

    def step(self) -> bool:
        """Process a single event; returns False when nothing is pending."""
        while self._heap:
            ev = heapq.heappop(self._heap)
            if ev.handle.cancelled:
                continue
            self.now = ev.fire_at
            self.events_processed += 1
            if self.trace_hook is not None:
                self.trace_hook(ev.fire_at, ev.seq, ev.label)
            ev.action()
            return True
        return False

    def run_until(self, t_end: SimTime) -> RunStats:
        """Process every event with fire_at <= t_end, then set now = t_end."""
        if t_end < self.now:
            raise SchedulingError(f"run_until({t_end}) is before now={self.now}")
        start_count = self.events_processed
        while True:
            nxt = self.peek_time()
            if nxt is None or nxt > t_end:
                break
            self.step()
        self.now = t_end
        return RunStats(self.events_processed - start_count, self.now)


class RngStreams:
    """Named deterministic random streams derived from one master seed."""

    def __init__(self, seed: int):
        self.seed = seed

    def stream(self, *key: object) -> random.Random:
        tag = f"{self.seed}/" + "/".join(str(k) for k in key)
        digest = hashlib.blake2b(tag.encode(), digest_size=8).digest()
        return random.Random(int.from_bytes(digest, "big"))
