"""TCP NewReno endpoints: the paced server-side sender and the mobile receiver.

Sequence numbers count packets; every DATA segment carries one MSS.
"""

from __future__ import annotations

from typing import Callable, List, Optional

from .engine import APP_SEND_CREDIT, NS_PER_MS, NS_PER_S, SERVER, TIMER_EXPIRY, Scheduler

DATA = 0
ACK = 1

SLOW_START = "SlowStart"
CONGESTION_AVOIDANCE = "CongestionAvoidance"
FAST_RECOVERY = "FastRecovery"

RTO_MAX_NS = 60 * NS_PER_S


class Segment:
    """A DATA packet or a cumulative ACK.

    DATA uses ``seq``; ACK uses ``ack_seq`` (next expected) and ``rwin``
    (bytes). Unused fields hold -1. ``ts_echo`` on an ACK repeats the
    ``sent_at`` of the DATA that triggered it.
    """

    __slots__ = ("kind", "seq", "ack_seq", "rwin", "sent_at", "conn_id", "ts_echo",
                 "retx", "launched_at", "early")

    def __init__(self, kind, seq=-1, ack_seq=-1, rwin=-1, sent_at=0, conn_id=0,
                 ts_echo=-1, early=False):
        self.kind = kind
        self.seq = seq
        self.ack_seq = ack_seq
        self.rwin = rwin
        self.sent_at = sent_at
        self.conn_id = conn_id
        self.ts_echo = ts_echo
        self.retx = False
        self.launched_at = -1
        self.early = early

    def __repr__(self) -> str:
        if self.kind == DATA:
            return f"Segment(DATA seq={self.seq})"
        tag = "early-ACK" if self.early else "ACK"
        return f"Segment({tag} ack_seq={self.ack_seq} rwin={self.rwin})"

    def is_valid(self) -> bool:
        if self.kind == DATA:
            return self.seq >= 0 and self.ack_seq == -1 and self.rwin == -1
        if self.kind == ACK:
            return self.seq == -1 and self.ack_seq >= 0 and self.rwin >= 0
        return False


def data_segment(seq: int, sent_at: int, conn_id: int = 0) -> Segment:
    return Segment(DATA, seq=seq, sent_at=sent_at, conn_id=conn_id)


def ack_segment(ack_seq: int, rwin: int, sent_at: int, ts_echo: int = -1,
                conn_id: int = 0, early: bool = False) -> Segment:
    return Segment(ACK, ack_seq=ack_seq, rwin=rwin, sent_at=sent_at, conn_id=conn_id,
                   ts_echo=ts_echo, early=early)


def pacing_interval_ns(mss_bytes: int, rate_bps: float) -> int:
    return int(round(mss_bytes * 8 * NS_PER_S / rate_bps))


class TcpSender:
    """NewReno sender whose application offers data at ``app_rate_cap_bps``.

    Emitted segments go to ``transmit(list_of_segments)``. Handlers also
    return the segments they emitted, which keeps them unit-testable.
    """

    def __init__(
        self,
        sim: Scheduler,
        transmit: Callable[[List[Segment]], None],
        mss_bytes: int = 1400,
        app_rate_cap_bps: float = 100e6,
        initial_cwnd_segments: int = 10,
        rto_min_ns: int = 200 * NS_PER_MS,
        initial_rto_ns: int = NS_PER_S,
        dupack_threshold: int = 3,
        initial_rwin: Optional[int] = None,
        conn_id: int = 0,
    ) -> None:
        if mss_bytes <= 0 or app_rate_cap_bps <= 0:
            raise ValueError("mss and app rate cap must be positive")
        self.sim = sim
        self.transmit = transmit
        self.mss = mss_bytes
        self.app_rate_cap_bps = app_rate_cap_bps
        self.pace_ns = pacing_interval_ns(mss_bytes, app_rate_cap_bps)
        self.rto_min = rto_min_ns
        self.dupthresh = dupack_threshold
        self.conn_id = conn_id

        self.cwnd = initial_cwnd_segments * mss_bytes
        self.ssthresh = 1 << 62
        self.phase = SLOW_START
        self.snd_una = 0
        self.snd_nxt = 0
        self.snd_max = 0
        self.recover = -1
        self.dup_ack_count = 0
        self.srtt: Optional[int] = None
        self.rttvar = 0
        self.rto = max(initial_rto_ns, rto_min_ns)
        self.peer_rwin = initial_rwin if initial_rwin is not None else 1 << 62

        self.next_send_at = 0
        self._credit_pending = False
        self._timer_deadline: Optional[int] = None
        self._timer_event_at: Optional[int] = None
        self._timer_token = 0

        self.segments_sent = 0
        self.retransmissions = 0
        self.fast_retransmits = 0
        self.rto_expiries = 0
        self.anomalies = 0
        self.window_violations = 0
        self.on_send_check: Optional[Callable[["TcpSender"], None]] = None

    # helpers ---------------------------------------------------------------
    @property
    def flight(self) -> int:
        """Segments outstanding, as NewReno's send window sees them."""
        return self.snd_nxt - self.snd_una

    def window_bytes(self) -> int:
        return min(self.cwnd, self.peer_rwin)

    def _can_send_new(self) -> bool:
        return (self.snd_nxt - self.snd_una + 1) * self.mss <= min(self.cwnd, self.peer_rwin)

    def _emit(self, seq: int, now: int, is_retx: bool) -> Segment:
        seg = Segment(DATA, seq=seq, sent_at=now, conn_id=self.conn_id)
        seg.retx = is_retx
        self.segments_sent += 1
        if is_retx:
            self.retransmissions += 1
        return seg

    def _arm_timer(self, now: int) -> None:
        deadline = now + self.rto
        self._timer_deadline = deadline
        pending = self._timer_event_at
        if pending is None or pending > deadline:
            self._timer_token += 1
            self._timer_event_at = deadline
            self.sim.at(deadline, TIMER_EXPIRY, SERVER, self._on_timer_event, self._timer_token)

    def _stop_timer(self) -> None:
        self._timer_deadline = None

    def _on_timer_event(self, token) -> None:
        if token != self._timer_token:
            return
        self._timer_event_at = None
        deadline = self._timer_deadline
        if deadline is None:
            return
        now = self.sim.now
        if now < deadline:
            self._timer_event_at = deadline
            self.sim.at(deadline, TIMER_EXPIRY, SERVER, self._on_timer_event, token)
            return
        out = self.on_rto()
        if out:
            self.transmit(out)

    def _schedule_credit(self, when: int) -> None:
        if not self._credit_pending:
            self._credit_pending = True
            self.sim.at(when, APP_SEND_CREDIT, SERVER, self._on_credit_event)

    def _on_credit_event(self, _payload) -> None:
        self._credit_pending = False
        out = self.app_send_tick()
        if out:
            self.transmit(out)

    # operations --------------------------------------------------------------
    def start(self) -> None:
        self._schedule_credit(self.sim.now)

    def app_send_tick(self) -> List[Segment]:
        """Send at most one paced segment now; re-arm the pacing credit."""
        now = self.sim.now
        out: List[Segment] = []
        if now >= self.next_send_at and self._can_send_new():
            seq = self.snd_nxt
            out.append(self._emit(seq, now, seq < self.snd_max))
            self.snd_nxt = seq + 1
            if self.snd_nxt > self.snd_max:
                self.snd_max = self.snd_nxt
            self.next_send_at = now + self.pace_ns
            if self._timer_deadline is None:
                self._arm_timer(now)
            if self.on_send_check is not None:
                self.on_send_check(self)
        if self._can_send_new():
            self._schedule_credit(max(now, self.next_send_at))
        return out

    def _kick(self) -> None:
        if self._can_send_new():
            self._schedule_credit(max(self.sim.now, self.next_send_at))

    def on_ack(self, seg: Segment) -> List[Segment]:
        now = self.sim.now
        ack = seg.ack_seq
        out: List[Segment] = []
        if ack > self.snd_max:
            self.anomalies += 1
            return out
        if ack < self.snd_una:
            return out
        mss = self.mss
        if ack > self.snd_una:
            acked = ack - self.snd_una
            if seg.ts_echo >= 0:
                self._rtt_sample(now - seg.ts_echo)
            if self.phase == FAST_RECOVERY:
                if ack > self.recover:
                    self.cwnd = self.ssthresh
                    self.phase = CONGESTION_AVOIDANCE
                    self.dup_ack_count = 0
                else:
                    # partial ack: retransmit the next hole, deflate
                    out.append(self._emit(ack, now, True))
                    self.cwnd = max(self.cwnd - acked * mss + mss, mss)
            else:
                self.dup_ack_count = 0
                if self.cwnd < self.ssthresh:
                    self.cwnd += mss
                else:
                    self.cwnd += max(1, mss * mss // self.cwnd)
                self.phase = SLOW_START if self.cwnd < self.ssthresh else CONGESTION_AVOIDANCE
            self.snd_una = ack
            if self.snd_nxt < ack:
                self.snd_nxt = ack
            self.peer_rwin = seg.rwin
            if self.snd_una == self.snd_max:
                self._stop_timer()
            else:
                self._arm_timer(now)
        elif self.snd_max > self.snd_una and seg.rwin <= self.peer_rwin:
            # an ACK that opens the window is an update, not a duplicate
            self.peer_rwin = seg.rwin
            self.dup_ack_count += 1
            if self.phase == FAST_RECOVERY:
                self.cwnd += mss
            elif self.dup_ack_count == self.dupthresh and self.snd_una > self.recover:
                flight = self.snd_max - self.snd_una
                self.ssthresh = max(flight * mss // 2, 2 * mss)
                out.append(self._emit(self.snd_una, now, True))
                self.fast_retransmits += 1
                self.cwnd = self.ssthresh + 3 * mss
                self.recover = self.snd_max - 1
                self.phase = FAST_RECOVERY
        else:
            # pure window update
            self.peer_rwin = seg.rwin
        self._kick()
        return out

    def handle_ack(self, seg: Segment) -> None:
        out = self.on_ack(seg)
        if out:
            self.transmit(out)

    def _rtt_sample(self, r: int) -> None:
        if r < 0:
            return
        if self.srtt is None:
            self.srtt = r
            self.rttvar = r // 2
        else:
            self.rttvar = (3 * self.rttvar + abs(self.srtt - r)) // 4
            self.srtt = (7 * self.srtt + r) // 8
        self.rto = min(max(self.rto_min, self.srtt + 4 * self.rttvar), RTO_MAX_NS)

    def on_rto(self) -> List[Segment]:
        now = self.sim.now
        if self.snd_una >= self.snd_max:
            self._stop_timer()
            return []
        self.rto_expiries += 1
        mss = self.mss
        # after a go-back only the retransmission counts as in flight, so a
        # repeated timeout pulls ssthresh down to its floor
        self.ssthresh = max(self.flight * mss // 2, 2 * mss)
        self.cwnd = mss
        self.phase = SLOW_START
        self.recover = self.snd_max - 1
        self.dup_ack_count = 0
        self.snd_nxt = self.snd_una + 1
        self.rto = min(self.rto * 2, RTO_MAX_NS)
        self._arm_timer(now)
        return [self._emit(self.snd_una, now, True)]


class TcpReceiver:
    """In-order reassembly at the mobile; one immediate ACK per DATA."""

    def __init__(
        self,
        sim: Scheduler,
        mss_bytes: int = 1400,
        buffer_capacity_bytes: int = 6 * 1024 * 1024,
        on_deliver: Optional[Callable[[int, int], None]] = None,
        on_arrival: Optional[Callable[[int, int, bool], None]] = None,
        conn_id: int = 0,
    ) -> None:
        self.sim = sim
        self.mss = mss_bytes
        self.capacity = buffer_capacity_bytes
        self.rcv_nxt = 0
        self.ooo_buffer: set = set()
        self.delivered_to_app = 0
        self.arrived_at_tcp = 0
        self.duplicates = 0
        self.buffer_drops = 0
        self.on_deliver = on_deliver
        self.on_arrival = on_arrival
        self.conn_id = conn_id

    def free_bytes(self) -> int:
        return self.capacity - len(self.ooo_buffer) * self.mss

    def receiver_on_data(self, seg: Segment) -> Segment:
        now = self.sim.now
        seq = seg.seq
        self.arrived_at_tcp += 1
        ooo = self.ooo_buffer
        duplicate = seq < self.rcv_nxt or seq in ooo
        if self.on_arrival is not None:
            self.on_arrival(now, seq, duplicate)
        if duplicate:
            self.duplicates += 1
        elif seq == self.rcv_nxt:
            deliver = self.on_deliver
            nxt = seq + 1
            if deliver is not None:
                deliver(now, seq)
            while nxt in ooo:
                ooo.remove(nxt)
                if deliver is not None:
                    deliver(now, nxt)
                nxt += 1
            self.delivered_to_app += nxt - seq
            self.rcv_nxt = nxt
        elif (len(ooo) + 1) * self.mss <= self.capacity:
            ooo.add(seq)
        else:
            self.buffer_drops += 1
        return Segment(ACK, ack_seq=self.rcv_nxt, rwin=self.capacity - len(ooo) * self.mss,
                       sent_at=now, conn_id=self.conn_id, ts_echo=seg.sent_at)
