import pytest

from mmpep.core.engine import (NS_PER_MS, NS_PER_US, SLOT_TICK, DispatchDigest, Event,
                               Scheduler, SimulationError, Topology, millis, seconds)


def test_equal_times_dispatch_in_seqno_order():
    sim = Scheduler()
    seen = []
    for _ in range(5):
        sim.at(0, SLOT_TICK, "x", lambda p: None)  # burn seqnos 0..4
    a = sim.schedule(Event(1 * NS_PER_MS, 0, SLOT_TICK, "bs", lambda p: seen.append(5)))
    b = sim.schedule(Event(1 * NS_PER_MS, 0, SLOT_TICK, "bs", lambda p: seen.append(6)))
    assert (a.seqno, b.seqno) == (5, 6)
    sim.run_until(10 * NS_PER_MS)
    assert seen == [5, 6]


def test_slot_tick_lands_on_exact_ns():
    sim = Scheduler()
    stamp = []
    sim.at(125 * NS_PER_US, SLOT_TICK, "bs", lambda p: stamp.append(sim.now))
    sim.run_until(NS_PER_MS)
    assert stamp == [125_000]


def test_scheduling_in_the_past_aborts():
    sim = Scheduler()
    sim.run_until(10)
    with pytest.raises(SimulationError):
        sim.at(5, SLOT_TICK, "bs", lambda p: None)


def test_empty_queue_returns_immediately():
    sim = Scheduler()
    assert sim.run_until(seconds(10)) == 0
    assert sim.now == seconds(10)


def test_cancelled_event_is_skipped():
    sim = Scheduler()
    hit = []
    s = sim.at(millis(1), SLOT_TICK, "bs", lambda p: hit.append(1))
    sim.at(millis(2), SLOT_TICK, "bs", lambda p: hit.append(2))
    sim.cancel(s)
    assert len(sim) == 1
    sim.run_until(millis(5))
    assert hit == [2]


def test_events_scheduled_during_dispatch_at_same_time_run_later():
    sim = Scheduler()
    order = []

    def first(_):
        order.append("a")
        sim.at(sim.now, SLOT_TICK, "bs", lambda p: order.append("c"))

    sim.at(0, SLOT_TICK, "bs", first)
    sim.at(0, SLOT_TICK, "bs", lambda p: order.append("b"))
    sim.run_until(0)
    assert order == ["a", "b", "c"]


def test_digest_tracks_sequence():
    def run(extra):
        sim = Scheduler()
        d = DispatchDigest()
        sim.trace = d
        for t in (3, 1, 2):
            sim.at(t, SLOT_TICK, "bs", lambda p: None)
        if extra:
            sim.at(4, SLOT_TICK, "bs", lambda p: None)
        sim.run_until(10)
        return d
    assert run(False).hexdigest() == run(False).hexdigest()
    assert run(False).hexdigest() != run(True).hexdigest()
    assert run(True).monotonic


def test_topology_rules():
    assert Topology().wired_one_way_delay_ns == 10 * NS_PER_MS
    with pytest.raises(ValueError):
        Topology(wired_one_way_delay_ns=0)
    with pytest.raises(ValueError):
        Topology(wired_loss_probability=0.01)


def test_wired_link_delivers_each_server_segment_once(make_sim):
    s = make_sim("none", los=None)
    arrivals = []
    inner = s._bs_receive_data

    def spy(segs):
        arrivals.extend((s.sim.now - seg.sent_at, seg.seq) for seg in segs)
        inner(segs)

    s._bs_receive_data = spy
    s.run_until(seconds(0.2))
    assert arrivals
    assert all(d == 10 * NS_PER_MS for d, _ in arrivals)
    sent = s.sender.segments_sent
    in_transit = sum(1 for _, _, _, _, h, p in s.sim._heap if h == spy for _ in p)
    assert len(arrivals) + in_transit == sent
