"""The mmWave hop: LOS/NLOS blockage schedule and the slotted TDD frame."""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Tuple

from .engine import NS_PER_S, NS_PER_US

LOS = "LOS"
NLOS = "NLOS"


def _other(state: str) -> str:
    return NLOS if state == LOS else LOS


class ChannelSchedule:
    """Deterministic blockage pattern, defined for every instant.

    Either periodic (``los_duration_ns`` / ``nlos_duration_ns`` alternating from
    ``start_state``) or an explicit list of ``(duration_ns, state)`` intervals,
    which repeats cyclically once exhausted.
    """

    def __init__(
        self,
        los_duration_ns: int = NS_PER_S,
        nlos_duration_ns: int = NS_PER_S,
        start_state: str = LOS,
        intervals: Optional[Sequence[Tuple[int, str]]] = None,
    ) -> None:
        if start_state not in (LOS, NLOS):
            raise ValueError(f"start_state must be LOS or NLOS, got {start_state!r}")
        if intervals:
            cleaned = []
            for duration, state in intervals:
                duration = int(duration)
                if duration <= 0:
                    raise ValueError("interval durations must be strictly positive")
                if state not in (LOS, NLOS):
                    raise ValueError(f"interval state must be LOS or NLOS, got {state!r}")
                if cleaned and cleaned[-1][1] == state:
                    cleaned[-1] = (cleaned[-1][0] + duration, state)
                else:
                    cleaned.append((duration, state))
            self.periodic = False
        else:
            if los_duration_ns <= 0 or nlos_duration_ns <= 0:
                raise ValueError("LOS and NLOS durations must be strictly positive")
            first = los_duration_ns if start_state == LOS else nlos_duration_ns
            second = nlos_duration_ns if start_state == LOS else los_duration_ns
            cleaned = [(int(first), start_state), (int(second), _other(start_state))]
            self.periodic = True
        self.los_duration_ns = int(los_duration_ns)
        self.nlos_duration_ns = int(nlos_duration_ns)
        self.start_state = cleaned[0][1]
        self.intervals = tuple(cleaned)
        starts = []
        los_before = []
        t = 0
        acc = 0
        for duration, state in cleaned:
            starts.append(t)
            los_before.append(acc)
            t += duration
            if state == LOS:
                acc += duration
        self._starts = starts
        self._los_before = los_before
        self._is_los = [state == LOS for _, state in cleaned]
        self.period_ns = t
        self._los_per_period = acc
        # a single-state list is constant forever
        self._constant = len(cleaned) == 1

    @classmethod
    def always(cls, state: str = LOS) -> "ChannelSchedule":
        return cls(intervals=[(NS_PER_S, state)])

    def _locate(self, t: int) -> Tuple[int, int, int]:
        cycle, phase = divmod(t, self.period_ns)
        idx = bisect_right(self._starts, phase) - 1
        return cycle, phase, idx

    def is_los(self, t: int) -> bool:
        if self._constant:
            return self._is_los[0]
        phase = t % self.period_ns
        if self.periodic:
            return (phase < self._starts[1]) == self._is_los[0]
        return self._is_los[bisect_right(self._starts, phase) - 1]

    def state_at(self, t: int) -> str:
        return LOS if self.is_los(t) else NLOS

    def next_change(self, t: int) -> Optional[int]:
        """First instant strictly after ``t`` where the state flips (None if never)."""
        if self._constant:
            return None
        cycle, phase, idx = self._locate(t)
        base = cycle * self.period_ns
        if idx + 1 < len(self._starts):
            return base + self._starts[idx + 1]
        return base + self.period_ns

    def next_los_start(self, t: int) -> Optional[int]:
        """Earliest instant >= ``t`` that is LOS (None if the channel never returns)."""
        if self.is_los(t):
            return t
        return self.next_change(t)

    def _los_until(self, t: int) -> int:
        cycle, phase, idx = self._locate(t)
        total = cycle * self._los_per_period + self._los_before[idx]
        if self._is_los[idx]:
            total += phase - self._starts[idx]
        return total

    def los_time(self, t0: int, t1: int) -> int:
        """Nanoseconds of LOS inside ``[t0, t1)``."""
        if t1 <= t0:
            return 0
        return self._los_until(t1) - self._los_until(t0)


@dataclass(frozen=True)
class SlotStructure:
    slot_ns: int = 125 * NS_PER_US
    tdd_pattern: str = "CCDDDUUU"
    alpha: float = 1.12
    segment_payload_size: int = 1400

    def __post_init__(self) -> None:
        if self.slot_ns <= 0:
            raise ValueError("slot_length must be > 0")
        if not self.tdd_pattern or set(self.tdd_pattern) - set("CDU"):
            raise ValueError(f"tdd_pattern must be a non-empty string over C/D/U, got {self.tdd_pattern!r}")
        if "D" not in self.tdd_pattern:
            raise ValueError("tdd_pattern needs at least one D slot")
        if "U" not in self.tdd_pattern:
            raise ValueError("tdd_pattern needs at least one U slot")
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if self.segment_payload_size <= 0:
            raise ValueError("segment_payload_size must be > 0")


class Channel:
    """Slotted service over a blockage schedule.

    ``link_rate`` is the LOS service rate in packets per slot averaged over
    the TDD cycle (defaults to ``alpha``). It is spread over the D slots by an
    exact rational accumulator, so ``slot_credit`` is a pure function of the
    slot index. ``csi_delay_slots`` is how stale the base station's view of
    the blockage state is when it schedules fresh data.
    """

    def __init__(
        self,
        schedule: Optional[ChannelSchedule] = None,
        slots: Optional[SlotStructure] = None,
        link_rate: Optional[float] = None,
        delivery_latency_slots: int = 1,
        uplink_latency_slots: int = 1,
        csi_delay_slots: int = 0,
    ) -> None:
        self.schedule = schedule if schedule is not None else ChannelSchedule.always(LOS)
        self.slots = slots if slots is not None else SlotStructure()
        rate = self.slots.alpha if link_rate is None else link_rate
        if not rate > 0:
            raise ValueError("link_rate must be > 0")
        if delivery_latency_slots < 0 or uplink_latency_slots < 0 or csi_delay_slots < 0:
            raise ValueError("latencies and csi delay must be >= 0 slots")
        self.link_rate = float(rate)
        pattern = self.slots.tdd_pattern
        self.pattern = pattern
        self.cycle_len = len(pattern)
        self.slot_ns = self.slots.slot_ns
        self.n_downlink = pattern.count("D")
        per_d = Fraction(str(rate)) * self.cycle_len / self.n_downlink
        self._num = per_d.numerator
        self._den = per_d.denominator
        self._d_ordinal = []
        n = 0
        for kind in pattern:
            self._d_ordinal.append(n)
            if kind == "D":
                n += 1
        self._next_d = self._next_offsets("D")
        self._next_u = self._next_offsets("U")
        self.delivery_latency_ns = delivery_latency_slots * self.slot_ns
        self.uplink_latency_ns = uplink_latency_slots * self.slot_ns
        self.csi_delay_slots = csi_delay_slots

    def _next_offsets(self, kind: str) -> list:
        # offset from each cycle position to the next slot of ``kind`` (0 if itself)
        L = self.cycle_len
        out = []
        for pos in range(L):
            for off in range(L):
                if self.pattern[(pos + off) % L] == kind:
                    out.append(off)
                    break
        return out

    # slot arithmetic -------------------------------------------------------
    def slot_start(self, k: int) -> int:
        return k * self.slot_ns

    def slot_kind(self, k: int) -> str:
        return self.pattern[k % self.cycle_len]

    def first_slot_at_or_after(self, t: int) -> int:
        return -(-t // self.slot_ns)

    def next_downlink_slot(self, k: int) -> int:
        """Smallest D-slot index >= k."""
        return k + self._next_d[k % self.cycle_len]

    def next_uplink_slot(self, k: int) -> int:
        return k + self._next_u[k % self.cycle_len]

    # service ---------------------------------------------------------------
    def slot_credit(self, k: int) -> int:
        """Packets the MAC may launch in slot ``k``, ignoring blockage."""
        pos = k % self.cycle_len
        if self.pattern[pos] != "D":
            return 0
        n = (k // self.cycle_len) * self.n_downlink + self._d_ordinal[pos]
        return ((n + 1) * self._num) // self._den - (n * self._num) // self._den

    def downlink_capacity(self, slot_index: int) -> int:
        """Segments deliverable in this slot: 0 for C/U slots and NLOS slots."""
        if slot_index < 0:
            raise ValueError("slot_index must be >= 0")
        if not self.schedule.is_los(slot_index * self.slot_ns):
            return 0
        return self.slot_credit(slot_index)

    def state_at(self, t: int) -> str:
        return self.schedule.state_at(t)

    def is_los_slot(self, k: int) -> bool:
        return self.schedule.is_los(k * self.slot_ns)

    def scheduler_sees_los(self, k: int) -> bool:
        """The base station's (CSI-delayed) belief about slot ``k``."""
        j = k - self.csi_delay_slots
        return self.schedule.is_los((j if j > 0 else 0) * self.slot_ns)

    def attempt_delivery(self, slot_index: int) -> Optional[int]:
        """Delivery delay in ns for a launch in ``slot_index``, or None if lost."""
        if self.schedule.is_los(slot_index * self.slot_ns):
            return self.delivery_latency_ns
        return None

    def los_throughput_bps(self) -> float:
        """Raw long-run LOS goodput of the hop."""
        return self.link_rate * self.slots.segment_payload_size * 8 * NS_PER_S / self.slot_ns
