"""Discrete-event core: integer-nanosecond clock, event queue, topology."""

from __future__ import annotations

import hashlib
import heapq
import random
import struct
from dataclasses import dataclass
from typing import Any, Callable, NamedTuple, Optional

NS_PER_US = 1_000
NS_PER_MS = 1_000_000
NS_PER_S = 1_000_000_000

# event kinds
SEGMENT_ARRIVAL = 0
SLOT_TICK = 1
HARQ_FEEDBACK_DUE = 2
TIMER_EXPIRY = 3
APP_SEND_CREDIT = 4

KIND_NAMES = {
    SEGMENT_ARRIVAL: "SegmentArrival",
    SLOT_TICK: "SlotTick",
    HARQ_FEEDBACK_DUE: "HarqFeedbackDue",
    TIMER_EXPIRY: "TimerExpiry",
    APP_SEND_CREDIT: "AppSendCredit",
}

SERVER = "server"
BASE_STATION = "base_station"
MOBILE = "mobile"
NODE_ROLES = (SERVER, BASE_STATION, MOBILE)


class SimulationError(RuntimeError):
    """Fatal logic error inside a simulation (e.g. scheduling in the past)."""


def seconds(value: float) -> int:
    return int(round(value * NS_PER_S))


def millis(value: float) -> int:
    return int(round(value * NS_PER_MS))


def micros(value: float) -> int:
    return int(round(value * NS_PER_US))


class Event(NamedTuple):
    """A scheduled event. Ordering is (fire_at, seqno); seqno is unique."""

    fire_at: int
    seqno: int
    kind: int
    target: str
    handler: Callable[[Any], Any]
    payload: Any = None


@dataclass(frozen=True)
class Topology:
    """Node layout; the server reaches the base station over an error-free wired link."""

    wired_one_way_delay_ns: int = 10 * NS_PER_MS
    wired_loss_probability: float = 0.0

    def __post_init__(self) -> None:
        if self.wired_one_way_delay_ns <= 0:
            raise ValueError("wired_one_way_delay must be strictly positive")
        if self.wired_loss_probability != 0.0:
            raise ValueError("the wired link is lossless; loss probability must be 0")


class Scheduler:
    """Single-threaded event loop.

    Events with equal ``fire_at`` run in insertion order. ``cancel`` is lazy:
    cancelled entries stay in the heap and are skipped when popped.
    """

    def __init__(self, seed: int = 0) -> None:
        self.now = 0
        self.seed = seed
        self.rng = random.Random(seed)
        self._heap: list = []
        self._seqno = 0
        self._cancelled: set = set()
        self.dispatched = 0
        self.scheduled = 0
        self.trace: Optional[Callable[[int, int, int, str], None]] = None
        self.after: Optional[Callable[[], None]] = None

    def __len__(self) -> int:
        return len(self._heap) - len(self._cancelled)

    def at(self, fire_at: int, kind: int, target: str, handler, payload=None) -> int:
        """Fast path of :meth:`schedule`; returns the assigned seqno."""
        if fire_at < self.now:
            raise SimulationError(
                f"event {KIND_NAMES.get(kind, kind)} for {target} scheduled at "
                f"{fire_at} ns, before current time {self.now} ns"
            )
        seqno = self._seqno
        self._seqno = seqno + 1
        self.scheduled += 1
        heapq.heappush(self._heap, (fire_at, seqno, kind, target, handler, payload))
        return seqno

    def schedule(self, ev: Event) -> Event:
        """Queue ``ev``; its seqno field is replaced by the queue's counter."""
        seqno = self.at(ev.fire_at, ev.kind, ev.target, ev.handler, ev.payload)
        return ev._replace(seqno=seqno)

    def cancel(self, seqno: int) -> None:
        self._cancelled.add(seqno)

    def peek_time(self) -> Optional[int]:
        heap = self._heap
        while heap and heap[0][1] in self._cancelled:
            self._cancelled.discard(heapq.heappop(heap)[1])
        return heap[0][0] if heap else None

    def run_until(self, t_end: int) -> int:
        """Dispatch every event with fire_at <= t_end. Returns the count dispatched."""
        heap = self._heap
        cancelled = self._cancelled
        pop = heapq.heappop
        trace = self.trace
        after = self.after
        count = 0
        while heap and heap[0][0] <= t_end:
            fire_at, seqno, kind, target, handler, payload = pop(heap)
            if cancelled and seqno in cancelled:
                cancelled.discard(seqno)
                continue
            self.now = fire_at
            if trace is not None:
                trace(fire_at, seqno, kind, target)
            handler(payload)
            if after is not None:
                after()
            count += 1
        if t_end > self.now:
            self.now = t_end
        self.dispatched += count
        return count


class DispatchDigest:
    """Running hash of the dispatch sequence; install as ``Scheduler.trace``."""

    _pack = struct.Struct("<qqb").pack

    def __init__(self) -> None:
        self._h = hashlib.blake2b(digest_size=16)
        self.count = 0
        self.last_time = -1
        self.monotonic = True

    def __call__(self, fire_at: int, seqno: int, kind: int, target: str) -> None:
        if fire_at < self.last_time:
            self.monotonic = False
        self.last_time = fire_at
        self.count += 1
        self._h.update(self._pack(fire_at, seqno, kind))

    def hexdigest(self) -> str:
        return self._h.hexdigest()
