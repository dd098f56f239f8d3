import pytest

from mmpep.core.engine import NS_PER_MS, NS_PER_S, Scheduler
from mmpep.core.proxy import Proxy, ProxyMode
from mmpep.core.tcp import ack_segment, data_segment

MSS = 1400
CACHE = 6 * 1024 * 1024


class FakeRlc:
    def __init__(self, empty=True):
        self.empty = empty
        self.occupancy = 0
        self.buffer_capacity = 1024

    def is_buffer_empty(self):
        return self.empty


def _proxy(mode="mmpep", cache=CACHE, rlc=None, **kw):
    sim = Scheduler()
    acks = []
    p = Proxy(sim, mode, acks.append, lambda: None, rlc=rlc if rlc is not None else FakeRlc(),
              cache_bytes=cache, **kw)
    return sim, p, acks


def _fill(p, n, launch=True):
    for q in range(n):
        p.on_data_from_server(data_segment(q, 0))
    if launch:
        p.drain_queues(0, n, launch=lambda s, slot: True)


def _dup(p, a, times):
    for _ in range(times):
        p.on_ack_from_mobile(ack_segment(a, 1 << 20, 0))


def test_mode_parsing():
    assert ProxyMode.parse("none") is ProxyMode.PASS_THROUGH
    assert ProxyMode.parse("MMPEP") is ProxyMode.MMPEP
    with pytest.raises(ValueError):
        ProxyMode.parse("split")


def test_early_ack_window():
    sim, p, acks = _proxy()
    ack = p.on_data_from_server(data_segment(0, 0))
    assert ack.early and ack.ack_seq == 1 and ack.rwin == CACHE - MSS
    assert acks == [ack]


def test_out_of_order_arrival_acks_the_hole():
    sim, p, acks = _proxy()
    p.on_data_from_server(data_segment(0, 0))
    ack = p.on_data_from_server(data_segment(2, 0))
    assert ack.ack_seq == 1
    ack = p.on_data_from_server(data_segment(1, 0))
    assert ack.ack_seq == 3


def test_cache_full_gives_no_early_ack():
    sim, p, acks = _proxy(cache=3 * MSS)
    _fill(p, 3, launch=False)
    assert acks[-1].rwin == 0 and p.stalled
    assert p.on_data_from_server(data_segment(3, 0)) is None
    assert p.cache_full_drops == 1 and len(acks) == 3


def test_server_retransmission_is_reacked():
    sim, p, acks = _proxy()
    _fill(p, 3)
    ack = p.on_data_from_server(data_segment(1, 0))
    assert ack.ack_seq == 3 and len(p.cache) == 3


def test_mobile_ack_evicts_below():
    sim, p, acks = _proxy()
    for q in range(90, 121):
        p.cache[q] = data_segment(q, 0)
    p.mobile_acked = 90
    p.highest_early_acked = 121
    p.on_ack_from_mobile(ack_segment(100, 1 << 20, 0))
    assert min(p.cache) == 100 and max(p.cache) == 120 and len(p.cache) == 21


def test_mmpep_third_duplicate_queues_batch():
    sim, p, acks = _proxy()
    assert p.batch_size == 14
    _fill(p, 100)
    p.on_ack_from_mobile(ack_segment(50, 1 << 20, 0))
    _dup(p, 50, 2)
    assert not p.retransmit_queue
    _dup(p, 50, 1)
    assert [s.seq for s in p.retransmit_queue] == list(range(50, 64))
    # later duplicates for the same hole are latched out
    _dup(p, 50, 5)
    assert len(p.retransmit_queue) == 14 and p.dup_triggers == 1


def test_pep_third_duplicate_queues_one():
    sim, p, acks = _proxy(mode="pep")
    _fill(p, 100)
    p.on_ack_from_mobile(ack_segment(50, 1 << 20, 0))
    _dup(p, 50, 3)
    assert [s.seq for s in p.retransmit_queue] == [50]
    _dup(p, 50, 1)
    assert [s.seq for s in p.retransmit_queue] == [50]
    p.drain_queues(1, 1, launch=lambda s, slot: True)
    _dup(p, 50, 1)
    assert [s.seq for s in p.retransmit_queue] == [50]


def test_batch_clipped_to_launched():
    sim, p, acks = _proxy()
    _fill(p, 100, launch=False)
    p.drain_queues(0, 55, launch=lambda s, slot: True)
    p.on_ack_from_mobile(ack_segment(50, 1 << 20, 0))
    _dup(p, 50, 3)
    assert [s.seq for s in p.retransmit_queue] == list(range(50, 55))


def test_timer_guard_holds_batch_while_rlc_busy():
    rlc = FakeRlc(empty=False)
    sim, p, acks = _proxy(rlc=rlc)
    _fill(p, 20)
    assert p.on_proxy_timer() == 0 and p.guard_skips == 1
    rlc.empty = True
    assert p.on_proxy_timer() == 14
    assert [s.seq for s in p.retransmit_queue] == list(range(14))
    assert p.timer_batches == 1


def test_pep_timer_sends_oldest_only():
    sim, p, acks = _proxy(mode="pep", rlc=FakeRlc(empty=False))
    _fill(p, 20)
    assert p.on_proxy_timer() == 1
    assert [s.seq for s in p.retransmit_queue] == [0]


def test_timer_fires_after_base_and_backs_off():
    sim, p, acks = _proxy(mode="pep")
    _fill(p, 5)
    fired = []
    inner = p.on_proxy_timer
    p.on_proxy_timer = lambda: (fired.append(sim.now), inner())[1]
    sim.run_until(4 * NS_PER_S)
    assert fired == [NS_PER_S, 3 * NS_PER_S]


def test_drain_priority():
    sim, p, acks = _proxy()
    for q in (7, 30, 31):
        p.cache[q] = data_segment(q, 0)
    p.retransmit_queue.append(p.cache[7])
    p._rq_members.add(7)
    p.initial_queue.extend([p.cache[30], p.cache[31]])
    out = p.drain_queues(3, 2, launch=lambda s, slot: True)
    assert [s.seq for s in out] == [7, 30] and out[0].retx
    assert [s.seq for s in p.initial_queue] == [31]


def test_drain_zero_capacity():
    sim, p, acks = _proxy()
    _fill(p, 3, launch=False)
    assert p.drain_queues(0, 0, launch=lambda s, slot: True) == []
    assert len(p.initial_queue) == 3


def test_drain_skips_evicted():
    sim, p, acks = _proxy()
    _fill(p, 5)
    p._enqueue_range(0, 5)
    p.on_ack_from_mobile(ack_segment(3, 1 << 20, 0))
    out = p.drain_queues(1, 10, launch=lambda s, slot: True)
    assert [s.seq for s in out] == [3, 4]


def test_drain_stops_when_launch_refuses():
    sim, p, acks = _proxy()
    _fill(p, 5, launch=False)
    out = p.drain_queues(0, 5, launch=lambda s, slot: s.seq < 2)
    assert [s.seq for s in out] == [0, 1, 2]


def test_window_update_after_drain():
    cache = 16 * MSS
    sim, p, acks = _proxy(cache=cache)
    _fill(p, 16)
    assert acks[-1].rwin == 0
    n = len(acks)
    p.on_ack_from_mobile(ack_segment(1, 1 << 20, 0))
    assert len(acks) == n  # one segment is below the update step
    p.on_ack_from_mobile(ack_segment(2, 1 << 20, 0))
    upd = acks[-1]
    assert len(acks) == n + 1 and upd.rwin == 2 * MSS and upd.ack_seq == 16
    assert not p.stalled and p.window_updates == 1


def test_pass_through_forwards_acks():
    rlc = FakeRlc()
    sim, p, acks = _proxy(mode="none", rlc=rlc)
    assert p.on_data_from_server(data_segment(0, 0)) is None
    a = ack_segment(1, 5000, 0)
    p.on_ack_from_mobile(a)
    assert acks == [a] and not p.cache


def test_pass_through_drop_tail():
    rlc = FakeRlc()
    rlc.occupancy = 1023
    sim, p, acks = _proxy(mode="none", rlc=rlc)
    p.on_data_from_server(data_segment(0, 0))
    p.on_data_from_server(data_segment(1, 0))
    assert len(p.initial_queue) == 1 and p.forward_drops == 1


def test_mobile_ack_beyond_early_ack_is_anomaly():
    sim, p, acks = _proxy()
    _fill(p, 3)
    p.on_ack_from_mobile(ack_segment(9, 1 << 20, 0))
    assert p.anomalies == 1 and p.mobile_acked == 0


def test_cache_smaller_than_segment_rejected():
    with pytest.raises(ValueError):
        _proxy(cache=100)
