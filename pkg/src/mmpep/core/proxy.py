"""TCP proxy at the base station.

Three modes share one object:

* ``none``: pass-through, the endpoints run plain end-to-end TCP;
* ``pep``: early-ACKs from a cache, one packet per loss signal;
* ``mmpep``: early-ACKs plus batch retransmission, with timer batches
  held back while the RLC still has the data in flight.
"""

from __future__ import annotations

from collections import deque
from enum import Enum
from typing import Callable, List, Optional

from .engine import BASE_STATION, NS_PER_S, TIMER_EXPIRY, Scheduler
from .sizing import BatchSizingParams, batch_size
from .tcp import ACK, Segment


class ProxyMode(str, Enum):
    PASS_THROUGH = "none"
    PEP = "pep"
    MMPEP = "mmpep"

    @classmethod
    def parse(cls, value) -> "ProxyMode":
        if isinstance(value, cls):
            return value
        aliases = {"none": cls.PASS_THROUGH, "passthrough": cls.PASS_THROUGH,
                   "pass-through": cls.PASS_THROUGH, "tcp": cls.PASS_THROUGH,
                   "pep": cls.PEP, "mmpep": cls.MMPEP}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown proxy mode {value!r}; expected none, pep or mmpep") from None


class Proxy:
    """Ack management, cache, and the two retransmission queues.

    ``to_server(seg)`` puts an ACK on the wired link; ``wake()`` asks the MAC
    for a downlink slot; ``rlc`` is consulted for the buffer-empty guard.
    """

    def __init__(
        self,
        sim: Scheduler,
        mode,
        to_server: Callable[[Segment], None],
        wake: Callable[[], None],
        rlc=None,
        mss_bytes: int = 1400,
        cache_bytes: int = 6 * 1024 * 1024,
        sizing: Optional[BatchSizingParams] = None,
        dupack_threshold: int = 3,
        timer_base_ns: Optional[int] = None,
        timer_floor_ns: int = NS_PER_S,
        timer_backoff_cap: int = 16,
    ) -> None:
        self.sim = sim
        self.mode = ProxyMode.parse(mode)
        self.caching = self.mode is not ProxyMode.PASS_THROUGH
        self.batching = self.mode is ProxyMode.MMPEP
        self.to_server = to_server
        self.wake = wake
        self.rlc = rlc
        self.mss = mss_bytes
        if cache_bytes < mss_bytes:
            raise ValueError("cache must hold at least one segment")
        self.cache_bytes = cache_bytes
        self.capacity_segments = cache_bytes // mss_bytes
        self.sizing = sizing if sizing is not None else BatchSizingParams()
        self.batch_size = batch_size(self.sizing)
        if dupack_threshold < 1:
            raise ValueError("proxy dupack threshold must be >= 1")
        self.dupthresh = dupack_threshold
        self.timer_base_fixed = timer_base_ns
        self.timer_floor = timer_floor_ns
        self.timer_backoff_cap = timer_backoff_cap

        self.cache: dict = {}
        self.mobile_acked = 0
        self.highest_early_acked = 0
        self.last_early_ack: Optional[Segment] = None
        self.stalled = False
        self.advertised = cache_bytes
        # smallest window growth worth advertising on its own
        self.update_step = max(mss_bytes, cache_bytes // 8)

        self.retransmit_queue: deque = deque()
        self.initial_queue: deque = deque()
        self._rq_members: set = set()
        self.next_fresh = 0
        self._dup_seq = -1
        self._dup_count = 0
        self._latched: set = set()

        self.wireless_srtt: Optional[int] = None
        self._timer_deadline: Optional[int] = None
        self._timer_event_at: Optional[int] = None
        self._timer_token = 0
        self._backoff = 1

        self.early_acks = 0
        self.window_updates = 0
        self.cache_full_drops = 0
        self.anomalies = 0
        self.dup_triggers = 0
        self.dup_retx_segments = 0
        self.timer_fires = 0
        self.timer_retx_segments = 0
        self.timer_batches = 0
        self.guard_skips = 0
        self.batch_segments = 0
        self.forwarded_acks = 0
        self.forward_drops = 0
        # optional hooks for audits
        self.on_timer_batch: Optional[Callable[["Proxy"], None]] = None
        self.on_early_ack: Optional[Callable[["Proxy", Segment], None]] = None

    # bookkeeping -------------------------------------------------------------
    def free_bytes(self) -> int:
        return self.cache_bytes - len(self.cache) * self.mss

    def queued(self) -> bool:
        return bool(self.retransmit_queue or self.initial_queue)

    @property
    def timer_base(self) -> int:
        if self.timer_base_fixed is not None:
            return self.timer_base_fixed
        srtt = self.wireless_srtt or 0
        return max(2 * srtt, self.timer_floor)

    # timer -----------------------------------------------------------------
    def _arm_timer(self, delay: int) -> None:
        now = self.sim.now
        deadline = now + delay
        self._timer_deadline = deadline
        pending = self._timer_event_at
        if pending is None or pending > deadline:
            self._timer_token += 1
            self._timer_event_at = deadline
            self.sim.at(deadline, TIMER_EXPIRY, BASE_STATION, self._on_timer_event,
                        self._timer_token)

    def _restart_timer(self) -> None:
        self._backoff = 1
        if self.cache:
            self._arm_timer(self.timer_base)
        else:
            self._timer_deadline = None

    def _on_timer_event(self, token) -> None:
        if token != self._timer_token:
            return
        self._timer_event_at = None
        deadline = self._timer_deadline
        if deadline is None:
            return
        if self.sim.now < deadline:
            self._timer_event_at = deadline
            self.sim.at(deadline, TIMER_EXPIRY, BASE_STATION, self._on_timer_event, token)
            return
        self._timer_deadline = None
        self.on_proxy_timer()

    # wired side --------------------------------------------------------------
    def on_data_from_server(self, seg: Segment) -> Optional[Segment]:
        """Returns the early-ACK sent, if any."""
        if not self.caching:
            # plain forwarding into a drop-tail queue shared with the RLC buffer
            rlc = self.rlc
            if rlc is not None and len(self.initial_queue) + rlc.occupancy >= rlc.buffer_capacity:
                self.forward_drops += 1
                return None
            self.initial_queue.append(seg)
            self.wake()
            return None
        seq = seg.seq
        cache = self.cache
        if seq < self.mobile_acked or seq in cache:
            # server retransmission of data we already hold or delivered
            ack = self._early_ack(seg.sent_at)
            self.to_server(ack)
            return ack
        if (len(cache) + 1) * self.mss > self.cache_bytes:
            self.cache_full_drops += 1
            self.anomalies += 1
            self.stalled = True
            return None
        was_empty = not cache
        cache[seq] = seg
        self.initial_queue.append(seg)
        if seq == self.highest_early_acked:
            nxt = seq + 1
            while nxt in cache:
                nxt += 1
            self.highest_early_acked = nxt
        ack = self._early_ack(seg.sent_at)
        self.last_early_ack = ack
        if ack.rwin < self.mss:
            self.stalled = True
        self.to_server(ack)
        if was_empty:
            self._restart_timer()
        self.wake()
        return ack

    def _early_ack(self, ts_echo: int) -> Segment:
        self.early_acks += 1
        ack = Segment(ACK, ack_seq=self.highest_early_acked, rwin=self.free_bytes(),
                      sent_at=self.sim.now, ts_echo=ts_echo, early=True)
        self.advertised = ack.rwin
        if self.on_early_ack is not None:
            self.on_early_ack(self, ack)
        return ack

    def _maybe_window_update(self) -> None:
        # Re-send the last early-ACK with a fresh window once the cache has
        # opened by a worthwhile amount over what the server last saw.
        last = self.last_early_ack
        if last is None:
            return
        free = self.free_bytes()
        if free < self.mss or free - self.advertised < self.update_step:
            return
        self.stalled = False
        self.window_updates += 1
        self.early_acks += 1
        upd = Segment(ACK, ack_seq=last.ack_seq, rwin=free, sent_at=self.sim.now,
                      ts_echo=last.ts_echo, early=True)
        self.advertised = free
        self.last_early_ack = upd
        if self.on_early_ack is not None:
            self.on_early_ack(self, upd)
        self.to_server(upd)

    # wireless side -----------------------------------------------------------
    def on_ack_from_mobile(self, seg: Segment) -> None:
        if not self.caching:
            self.forwarded_acks += 1
            self.to_server(seg)
            return
        a = seg.ack_seq
        if a > self.highest_early_acked:
            self.anomalies += 1
            return
        if a > self.mobile_acked:
            cache = self.cache
            prev = cache.get(a - 1)
            if prev is not None and not prev.retx and prev.launched_at >= 0:
                self._wireless_rtt_sample(self.sim.now - prev.launched_at)
            for s in range(self.mobile_acked, a):
                cache.pop(s, None)
            self.mobile_acked = a
            self._dup_seq = a
            self._dup_count = 0
            if self._latched:
                self._latched = {s for s in self._latched if s >= a}
            self._restart_timer()
            self._maybe_window_update()
            return
        if a < self.mobile_acked or not self.cache:
            return
        # duplicate ACK for the hole at ``a``
        if a != self._dup_seq:
            self._dup_seq = a
            self._dup_count = 0
        self._dup_count += 1
        if self._dup_count < self.dupthresh:
            return
        if self.batching:
            if a not in self._latched:
                self._latched.add(a)
                self.dup_triggers += 1
                self.dup_retx_segments += self._enqueue_range(a, self.batch_size)
        else:
            # one packet per duplicate ACK, unless that packet is already queued
            n = self._enqueue_range(a, 1)
            if n:
                self.dup_triggers += 1
                self.dup_retx_segments += n

    def _enqueue_range(self, start: int, count: int) -> int:
        """Queue cached, already-launched seqs in ``[start, start + count)``."""
        cache = self.cache
        members = self._rq_members
        q = self.retransmit_queue
        end = min(start + count, self.next_fresh)
        n = 0
        for s in range(start, end):
            seg = cache.get(s)
            if seg is not None and s not in members:
                members.add(s)
                q.append(seg)
                n += 1
        if n:
            self.wake()
        return n

    def _wireless_rtt_sample(self, r: int) -> None:
        if r < 0:
            return
        if self.wireless_srtt is None:
            self.wireless_srtt = r
        else:
            self.wireless_srtt = (7 * self.wireless_srtt + r) // 8

    def on_proxy_timer(self) -> int:
        """Handle an expiry; returns the number of segments queued."""
        if not self.caching or not self.cache:
            return 0
        self.timer_fires += 1
        oldest = self.mobile_acked
        queued = 0
        if self.batching:
            if self.rlc is None or self.rlc.is_buffer_empty():
                queued = self._enqueue_range(oldest, self.batch_size)
                if queued:
                    self.timer_batches += 1
                    if self.on_timer_batch is not None:
                        self.on_timer_batch(self)
            else:
                self.guard_skips += 1
        else:
            queued = self._enqueue_range(oldest, 1)
        self.timer_retx_segments += queued
        if self._backoff < self.timer_backoff_cap:
            self._backoff *= 2
        self._arm_timer(self.timer_base * self._backoff)
        return queued

    def drain_queues(self, slot_index: int, capacity: int, launch=None) -> List[Segment]:
        """Pop up to ``capacity`` segments, retransmissions first.

        Each popped segment is passed to ``launch(seg, slot)`` (the RLC by
        default); popping stops early if ``launch`` refuses one.
        """
        out: List[Segment] = []
        if capacity <= 0:
            return out
        if launch is None:
            launch = self.rlc.launch if self.rlc is not None else None
        rq = self.retransmit_queue
        iq = self.initial_queue
        caching = self.caching
        cache = self.cache
        members = self._rq_members
        while len(out) < capacity and rq:
            seg = rq.popleft()
            members.discard(seg.seq)
            if seg.seq not in cache:
                continue
            seg.retx = True
            out.append(seg)
            if launch is not None and not launch(seg, slot_index):
                return out
        while len(out) < capacity and iq:
            seg = iq.popleft()
            if caching:
                if seg.seq not in cache:
                    continue
                if seg.seq >= self.next_fresh:
                    self.next_fresh = seg.seq + 1
            out.append(seg)
            if launch is not None and not launch(seg, slot_index):
                return out
        return out
