"""Application-layer rate and delivery ratio, plus event counters."""

from __future__ import annotations

from array import array
from bisect import bisect_left
from typing import Dict, List, Optional, Tuple

from .engine import NS_PER_S


class MetricsRecorder:
    """Records app deliveries and TCP arrivals at the mobile.

    Deliveries are in order, so the i-th entry of ``delivery_times`` is the
    delivery instant of seq i. Per-arrival logs are only kept when
    ``keep_arrival_log`` is set.
    """

    def __init__(self, payload_bytes: int = 1400, bin_ns: int = NS_PER_S,
                 keep_arrival_log: bool = False) -> None:
        if bin_ns <= 0:
            raise ValueError("bin width must be > 0")
        self.payload_bytes = payload_bytes
        self.bin_ns = bin_ns
        self.delivery_times = array("q")
        self.arrivals = 0
        self.duplicate_arrivals = 0
        self.order_violations = 0
        self.keep_arrival_log = keep_arrival_log
        self.tcp_arrival_log: List[Tuple[int, int, bool]] = []
        self.counters: Dict[str, int] = {}

    # recording -------------------------------------------------------------
    def on_app_delivery(self, t: int, seq: int) -> None:
        if seq != len(self.delivery_times):
            self.order_violations += 1
        self.delivery_times.append(t)

    def on_tcp_arrival(self, t: int, seq: int, duplicate: bool) -> None:
        self.arrivals += 1
        if duplicate:
            self.duplicate_arrivals += 1
        if self.keep_arrival_log:
            self.tcp_arrival_log.append((t, seq, duplicate))

    @property
    def delivered(self) -> int:
        return len(self.delivery_times)

    @property
    def app_delivery_log(self) -> List[Tuple[int, int]]:
        return [(t, i) for i, t in enumerate(self.delivery_times)]

    # queries ---------------------------------------------------------------
    def delivered_between(self, t0: int, t1: int) -> int:
        """Deliveries with ``t0 <= t < t1``."""
        times = self.delivery_times
        return bisect_left(times, t1) - bisect_left(times, t0)

    def rate(self, t0: int, t1: int) -> float:
        """In-order application goodput over ``[t0, t1)`` in bits/s."""
        if t1 <= t0:
            raise ValueError("rate window must have positive length")
        bits = self.delivered_between(t0, t1) * self.payload_bytes * 8
        return bits * NS_PER_S / (t1 - t0)

    def delivery_ratio(self) -> Optional[float]:
        if self.arrivals == 0:
            return None
        return self.delivered / self.arrivals

    def rate_series(self, duration_ns: int) -> List[float]:
        """Per-bin rates (bits/s) covering ``[0, duration_ns)``; last bin may be partial."""
        out = []
        t = 0
        while t < duration_ns:
            t1 = min(t + self.bin_ns, duration_ns)
            out.append(self.rate(t, t1))
            t = t1
        return out

    def total_bits(self) -> int:
        return self.delivered * self.payload_bytes * 8
