"""Wires server, base station and mobile into one runnable simulation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

from .channel import Channel, ChannelSchedule, SlotStructure
from .engine import (BASE_STATION, MOBILE, NS_PER_MS, NS_PER_S, SEGMENT_ARRIVAL, SERVER,
                     SLOT_TICK, DispatchDigest, Scheduler, Topology)
from .metrics import MetricsRecorder
from .proxy import Proxy, ProxyMode
from .rlc import RlcHarq
from .sizing import BatchSizingParams
from .tcp import TcpReceiver, TcpSender


@dataclass
class SimParams:
    """Flat parameter set for one simulation instance (all times in ns)."""

    mode: str = "none"
    seed: int = 0
    # channel
    schedule: ChannelSchedule = field(default_factory=ChannelSchedule)
    slot_ns: int = 125_000
    tdd_pattern: str = "CCDDDUUU"
    alpha: float = 1.12
    link_rate: Optional[float] = None
    delivery_latency_slots: int = 1
    uplink_latency_slots: int = 1
    csi_delay_slots: int = 10
    # link layer
    beta_slots: int = 10
    max_link_retx: int = 3
    rlc_buffer_capacity: int = 1024
    # wired
    wired_one_way_delay_ns: int = 10 * NS_PER_MS
    # tcp
    mss_bytes: int = 1400
    app_rate_cap_bps: float = 100e6
    initial_cwnd_segments: int = 10
    rto_min_ns: int = 200 * NS_PER_MS
    initial_rto_ns: int = NS_PER_S
    dupack_threshold: int = 3
    receiver_buffer_bytes: int = 6 * 1024 * 1024
    # proxy
    cache_bytes: int = 6 * 1024 * 1024
    sigma: float = 0.1
    epsilon: float = 0.01
    batch_rounding: str = "ceil"
    proxy_dupack_threshold: int = 3
    proxy_timer_base_ns: Optional[int] = None
    # metrics
    bin_ns: int = NS_PER_S
    keep_arrival_log: bool = False


class InvariantAudit:
    """Checks protocol invariants after every event, from independent bookkeeping.

    Tracks the early-ACK and mobile-ACK high-water marks seen on the links and
    the set of RLC entries in flight, then compares them with the proxy's own
    state. Violations are collected as strings rather than raised.
    """

    def __init__(self, sim: "Simulation", check_cache_every_event: bool = True) -> None:
        self.s = sim
        self.violations: List[str] = []
        self.max_early_ack = 0
        self.max_mobile_ack = 0
        self.in_flight: Dict[int, int] = {}
        self.harq_checked = 0
        self.check_cache = check_cache_every_event
        self.last_delivered = -1

    def _fail(self, msg: str) -> None:
        if len(self.violations) < 50:
            self.violations.append(f"t={self.s.sim.now}: {msg}")

    # hooks -----------------------------------------------------------------
    def early_ack(self, proxy: Proxy, ack) -> None:
        if ack.rwin < 0:
            self._fail(f"early-ACK with negative window {ack.rwin}")
        if ack.rwin != proxy.free_bytes():
            self._fail("early-ACK window disagrees with free cache space")
        if ack.ack_seq > self.max_early_ack:
            self.max_early_ack = ack.ack_seq

    def mobile_ack(self, ack) -> None:
        if ack.ack_seq > self.max_mobile_ack:
            self.max_mobile_ack = ack.ack_seq

    def rlc_event(self, event: str, seq: int, slot: int) -> None:
        if event == "launch":
            self.in_flight[seq] = self.in_flight.get(seq, 0) + 1
            return
        if event == "relaunch":
            return
        # feedback outcome: must land exactly beta slots after the launch slot
        expected = (slot + self.s.params.beta_slots) * self.s.channel.slot_ns
        if self.s.sim.now != expected:
            self._fail(f"HARQ feedback for seq {seq} at {self.s.sim.now}, expected {expected}")
        self.harq_checked += 1
        if event != "Retransmitting":
            n = self.in_flight.get(seq, 0) - 1
            if n < 0:
                self._fail(f"feedback completes seq {seq} that was not in flight")
            elif n == 0:
                del self.in_flight[seq]
            else:
                self.in_flight[seq] = n

    def timer_batch(self, proxy: Proxy) -> None:
        if self.in_flight:
            self._fail(f"timer batch with {len(self.in_flight)} entries in RLC flight")

    def send_check(self, sender: TcpSender) -> None:
        if sender.flight * sender.mss > min(sender.cwnd, sender.peer_rwin):
            self._fail(f"flight {sender.flight} exceeds window at new-data send")

    def deliver(self, t: int, seq: int) -> None:
        if seq != self.last_delivered + 1:
            self._fail(f"app delivery of {seq} after {self.last_delivered}")
        self.last_delivered = seq

    # per-event check ---------------------------------------------------------
    def after_event(self) -> None:
        proxy = self.s.proxy
        if not proxy.caching or not self.check_cache:
            return
        lo, hi = self.max_mobile_ack, self.max_early_ack
        cache = proxy.cache
        expected = hi - lo if hi > lo else 0
        if len(cache) != expected:
            self._fail(f"cache holds {len(cache)} segments, expected {expected} in [{lo}, {hi})")
        elif cache and (min(cache) < lo or max(cache) >= hi):
            self._fail(f"cache keys outside [{lo}, {hi})")
        if len(cache) * proxy.mss > proxy.cache_bytes:
            self._fail("cache over capacity")

    @property
    def ok(self) -> bool:
        return not self.violations


class Simulation:
    """One server-to-mobile download through the base station."""

    def __init__(self, params: SimParams, trace: bool = False, audit: bool = False) -> None:
        self.params = p = params
        self.mode = ProxyMode.parse(p.mode)
        self.sim = sim = Scheduler(p.seed)
        self.topology = Topology(wired_one_way_delay_ns=p.wired_one_way_delay_ns)
        slots = SlotStructure(slot_ns=p.slot_ns, tdd_pattern=p.tdd_pattern, alpha=p.alpha,
                              segment_payload_size=p.mss_bytes)
        self.channel = ch = Channel(p.schedule, slots, link_rate=p.link_rate,
                                    delivery_latency_slots=p.delivery_latency_slots,
                                    uplink_latency_slots=p.uplink_latency_slots,
                                    csi_delay_slots=p.csi_delay_slots)
        self.metrics = m = MetricsRecorder(p.mss_bytes, p.bin_ns, p.keep_arrival_log)
        self.wired_delay = self.topology.wired_one_way_delay_ns

        self.sender = TcpSender(sim, self._server_transmit, p.mss_bytes, p.app_rate_cap_bps,
                                p.initial_cwnd_segments, p.rto_min_ns, p.initial_rto_ns,
                                p.dupack_threshold, initial_rwin=p.receiver_buffer_bytes)
        self.rlc = RlcHarq(sim, ch, self._mobile_receive, p.beta_slots, p.max_link_retx,
                           p.rlc_buffer_capacity, on_loss=None, on_retx_ready=self._wake_dl)
        sizing = BatchSizingParams(alpha=p.alpha, beta=p.beta_slots, sigma=p.sigma,
                                   epsilon=p.epsilon, rounding=p.batch_rounding)
        self.proxy = Proxy(sim, self.mode, self._bs_to_server, self._wake_dl, self.rlc,
                           p.mss_bytes, p.cache_bytes, sizing, p.proxy_dupack_threshold,
                           p.proxy_timer_base_ns)
        self.receiver = TcpReceiver(sim, p.mss_bytes, p.receiver_buffer_bytes,
                                    on_deliver=m.on_app_delivery, on_arrival=m.on_tcp_arrival)

        self._dl_tick_slot: Optional[int] = None
        self._last_dl_slot = -1
        self._ul_queue: list = []
        self._ul_tick_pending = False
        self.uplink_acks_lost = 0
        self.uplink_acks_sent = 0
        self.dl_ticks = 0

        self.digest: Optional[DispatchDigest] = None
        if trace:
            self.digest = DispatchDigest()
            sim.trace = self.digest
        self.audit: Optional[InvariantAudit] = None
        if audit:
            self._install_audit()
        self.sender.start()

    def _install_audit(self) -> None:
        a = self.audit = InvariantAudit(self)
        self.proxy.on_early_ack = a.early_ack
        self.proxy.on_timer_batch = a.timer_batch
        self.rlc.audit = a.rlc_event
        self.sender.on_send_check = a.send_check
        inner = self.receiver.on_deliver

        def deliver(t: int, seq: int) -> None:
            a.deliver(t, seq)
            inner(t, seq)

        self.receiver.on_deliver = deliver
        self.sim.after = a.after_event

    # wired link ------------------------------------------------------------
    def _server_transmit(self, segs: list) -> None:
        self.sim.at(self.sim.now + self.wired_delay, SEGMENT_ARRIVAL, BASE_STATION,
                    self._bs_receive_data, segs)

    def _bs_receive_data(self, segs: list) -> None:
        on_data = self.proxy.on_data_from_server
        for seg in segs:
            on_data(seg)

    def _bs_to_server(self, ack) -> None:
        self.sim.at(self.sim.now + self.wired_delay, SEGMENT_ARRIVAL, SERVER,
                    self.sender.handle_ack, ack)

    # base station MAC --------------------------------------------------------
    def _wake_dl(self) -> None:
        rlc_work = bool(self.rlc.retx_queue)
        if not rlc_work and not self.proxy.queued():
            return
        ch = self.channel
        k = ch.first_slot_at_or_after(self.sim.now)
        if k <= self._last_dl_slot:
            k = self._last_dl_slot + 1
        k = ch.next_downlink_slot(k)
        pending = self._dl_tick_slot
        if pending is not None and pending <= k:
            return
        if not rlc_work and not ch.scheduler_sees_los(k):
            # nothing to send until the base station believes the channel is back
            d = ch.csi_delay_slots
            t_los = ch.schedule.next_los_start(max(k - d, 0) * ch.slot_ns)
            if t_los is None:
                return
            k = ch.next_downlink_slot(max(k, ch.first_slot_at_or_after(t_los) + d))
            if pending is not None and pending <= k:
                return
        # a later pending tick becomes stale once this one is queued
        self._dl_tick_slot = k
        self.sim.at(k * ch.slot_ns, SLOT_TICK, BASE_STATION, self._dl_tick, k)

    def _dl_tick(self, k: int) -> None:
        if k != self._dl_tick_slot:
            return
        self._dl_tick_slot = None
        self._last_dl_slot = k
        self.dl_ticks += 1
        ch = self.channel
        credit = ch.slot_credit(k)
        if credit:
            rlc = self.rlc
            if rlc.retx_queue:
                credit -= rlc.relaunch_pending(k, credit)
            if credit > 0 and self.proxy.queued() and ch.scheduler_sees_los(k):
                self.proxy.drain_queues(k, credit, rlc.launch)
        self._wake_dl()

    # mobile ------------------------------------------------------------------
    def _mobile_receive(self, segs: list) -> None:
        on_data = self.receiver.receiver_on_data
        q = self._ul_queue
        for seg in segs:
            q.append(on_data(seg))
        if not self._ul_tick_pending:
            ch = self.channel
            k = ch.next_uplink_slot(ch.first_slot_at_or_after(self.sim.now))
            self._ul_tick_pending = True
            self.sim.at(k * ch.slot_ns, SLOT_TICK, MOBILE, self._ul_tick, k)

    def _ul_tick(self, k: int) -> None:
        self._ul_tick_pending = False
        acks = self._ul_queue
        self._ul_queue = []
        if self.channel.is_los_slot(k):
            self.uplink_acks_sent += len(acks)
            self.sim.at(self.sim.now + self.channel.uplink_latency_ns, SEGMENT_ARRIVAL,
                        BASE_STATION, self._bs_receive_acks, acks)
        else:
            self.uplink_acks_lost += len(acks)

    def _bs_receive_acks(self, acks: list) -> None:
        on_ack = self.proxy.on_ack_from_mobile
        a = self.audit
        for ack in acks:
            if a is not None:
                a.mobile_ack(ack)
            on_ack(ack)

    # driving -----------------------------------------------------------------
    def run_until(self, t_end: int) -> int:
        return self.sim.run_until(t_end)

    def counters(self) -> Dict[str, int]:
        s, r, px, rc = self.sender, self.rlc, self.proxy, self.receiver
        return {
            "segments_sent": s.segments_sent,
            "server_retransmissions": s.retransmissions,
            "fast_retransmits": s.fast_retransmits,
            "rto_expiries": s.rto_expiries,
            "rlc_launches": r.launches,
            "rlc_retransmissions": r.link_retransmissions,
            "rlc_exhausted": r.exhausted,
            "rlc_overflow_drops": r.overflow_drops,
            "forward_drops": px.forward_drops,
            "early_acks": px.early_acks,
            "cache_full_drops": px.cache_full_drops,
            "dup_triggers": px.dup_triggers,
            "dup_retx_segments": px.dup_retx_segments,
            "timer_fires": px.timer_fires,
            "timer_batches": px.timer_batches,
            "timer_retx_segments": px.timer_retx_segments,
            "guard_skips": px.guard_skips,
            "tcp_arrivals": rc.arrived_at_tcp,
            "app_deliveries": rc.delivered_to_app,
            "duplicate_arrivals": rc.duplicates,
            "receiver_buffer_drops": rc.buffer_drops,
            "uplink_acks_lost": self.uplink_acks_lost,
            "events": self.sim.dispatched,
        }
