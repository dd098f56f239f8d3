"""Downlink link layer at the base station: HARQ feedback and RLC retransmission."""

from __future__ import annotations

from collections import deque
from typing import Callable, List, Optional

from .channel import Channel
from .engine import BASE_STATION, HARQ_FEEDBACK_DUE, MOBILE, SEGMENT_ARRIVAL, Scheduler

COMPLETED = "Completed"
RETRANSMITTING = "Retransmitting"
EXHAUSTED_LOSS = "ExhaustedLoss"


class RlcEntry:
    __slots__ = ("seg", "launch_slot", "retx_count", "delivered")

    def __init__(self, seg, launch_slot: int) -> None:
        self.seg = seg
        self.launch_slot = launch_slot
        self.retx_count = 0
        self.delivered = False

    def __repr__(self) -> str:
        return (f"RlcEntry(seq={self.seg.seq}, slot={self.launch_slot}, "
                f"retx={self.retx_count}, delivered={self.delivered})")


class RlcHarq:
    """HARQ/RLC state for the single downlink flow.

    An entry is "in flight" from its first launch until an ACK feedback or
    retransmission exhaustion; that includes time spent waiting in the
    local retransmission queue. Feedback for every launch in slot ``k`` is
    batched into one event at slot ``k + beta``.
    """

    def __init__(
        self,
        sim: Scheduler,
        channel: Channel,
        deliver: Callable[[list], None],
        beta_slots: int = 10,
        max_link_retx: int = 3,
        buffer_capacity: int = 1024,
        on_loss: Optional[Callable[[object], None]] = None,
        on_retx_ready: Optional[Callable[[], None]] = None,
    ) -> None:
        if beta_slots <= 0:
            raise ValueError("beta_slots must be > 0")
        if max_link_retx < 0:
            raise ValueError("max_link_retx must be >= 0")
        if buffer_capacity <= 0:
            raise ValueError("rlc buffer capacity must be > 0")
        self.sim = sim
        self.channel = channel
        self.deliver = deliver
        self.beta = beta_slots
        self.max_link_retx = max_link_retx
        self.buffer_capacity = buffer_capacity
        self.on_loss = on_loss
        self.on_retx_ready = on_retx_ready

        self.occupancy = 0
        self.retx_queue: deque = deque()
        self._batch_slot = -1
        self._batch: List[RlcEntry] = []
        self._deliver_slot = -1
        self._deliver_batch: list = []

        self.launches = 0
        self.first_launches = 0
        self.link_retransmissions = 0
        self.completed = 0
        self.exhausted = 0
        self.overflow_drops = 0
        self.deliveries = 0
        # optional audit hook: (event, seq, slot); event is "launch", "relaunch"
        # or the feedback outcome
        self.audit: Optional[Callable[[str, int, int], None]] = None

    def is_buffer_empty(self) -> bool:
        return self.occupancy == 0

    def has_space(self) -> bool:
        return self.occupancy < self.buffer_capacity

    def launch(self, seg, slot: int) -> bool:
        """First transmission of ``seg`` in D slot ``slot``. False if the buffer is full."""
        if self.occupancy >= self.buffer_capacity:
            self.overflow_drops += 1
            if self.on_loss is not None:
                self.on_loss(seg)
            return False
        self.occupancy += 1
        self.first_launches += 1
        if seg.launched_at < 0:
            seg.launched_at = self.sim.now
        if self.audit is not None:
            self.audit("launch", seg.seq, slot)
        self._transmit(RlcEntry(seg, slot), slot)
        return True

    def relaunch_pending(self, slot: int, budget: int) -> int:
        """Send queued link-layer retransmissions; returns how many were sent."""
        q = self.retx_queue
        sent = 0
        while q and sent < budget:
            entry = q.popleft()
            entry.launch_slot = slot
            self.link_retransmissions += 1
            if self.audit is not None:
                self.audit("relaunch", entry.seg.seq, slot)
            self._transmit(entry, slot)
            sent += 1
        return sent

    def _transmit(self, entry: RlcEntry, slot: int) -> None:
        self.launches += 1
        delay = self.channel.attempt_delivery(slot)
        entry.delivered = delay is not None
        if delay is not None:
            if slot != self._deliver_slot:
                self._deliver_slot = slot
                self._deliver_batch = []
                self.sim.at(self.sim.now + delay, SEGMENT_ARRIVAL, MOBILE,
                            self.deliver, self._deliver_batch)
            self._deliver_batch.append(entry.seg)
            self.deliveries += 1
        if slot != self._batch_slot:
            self._batch_slot = slot
            self._batch = []
            fire = (slot + self.beta) * self.channel.slot_ns
            self.sim.at(fire, HARQ_FEEDBACK_DUE, BASE_STATION, self._on_feedback_batch,
                        self._batch)
        self._batch.append(entry)

    def _on_feedback_batch(self, entries: List[RlcEntry]) -> None:
        ready = False
        for entry in entries:
            if self.on_harq_feedback(entry) == RETRANSMITTING:
                ready = True
        if ready and self.on_retx_ready is not None:
            self.on_retx_ready()

    def on_harq_feedback(self, entry: RlcEntry) -> str:
        if entry.delivered:
            self.occupancy -= 1
            self.completed += 1
            outcome = COMPLETED
        elif entry.retx_count < self.max_link_retx:
            entry.retx_count += 1
            self.retx_queue.append(entry)
            outcome = RETRANSMITTING
        else:
            self.occupancy -= 1
            self.exhausted += 1
            if self.on_loss is not None:
                self.on_loss(entry.seg)
            outcome = EXHAUSTED_LOSS
        if self.audit is not None:
            self.audit(outcome, entry.seg.seq, entry.launch_slot)
        return outcome
