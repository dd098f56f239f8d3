from fractions import Fraction

import pytest
from oracles import credits_oracle, los_capacity_bps

from mmpep.core.channel import LOS, NLOS, Channel, ChannelSchedule, SlotStructure
from mmpep.core.engine import NS_PER_S

S = NS_PER_S


def test_periodic_states():
    sch = ChannelSchedule(S, S)
    assert sch.state_at(S // 2) == LOS
    assert sch.state_at(3 * S // 2) == NLOS
    assert sch.state_at(5 * S // 2) == LOS


def test_long_los_interval():
    # the long-LOS sweep opens with its outage, so t=105 s sits in the first LOS stretch
    sch = ChannelSchedule(100 * S, 10 * S, start_state=NLOS)
    assert sch.state_at(105 * S) == LOS
    assert sch.state_at(5 * S) == NLOS
    assert sch.state_at(110 * S) == NLOS
    los_first = ChannelSchedule(100 * S, 10 * S)
    assert los_first.state_at(100 * S) == NLOS
    assert los_first.state_at(110 * S) == LOS


def test_start_in_nlos_and_explicit_intervals():
    sch = ChannelSchedule(S, 2 * S, start_state=NLOS)
    assert sch.state_at(0) == NLOS and sch.state_at(2 * S) == LOS
    iv = ChannelSchedule(intervals=[(S, LOS), (S, LOS), (S, NLOS)])
    assert iv.intervals == ((2 * S, LOS), (S, NLOS))
    assert iv.state_at(int(2.5 * S)) == NLOS
    assert iv.state_at(3 * S) == LOS  # the list repeats


@pytest.mark.parametrize("bad", [dict(los_duration_ns=0), dict(nlos_duration_ns=-1),
                                 dict(start_state="BLOCKED"),
                                 dict(intervals=[(0, LOS)]), dict(intervals=[(S, "x")])])
def test_schedule_rejects_bad_input(bad):
    with pytest.raises(ValueError):
        ChannelSchedule(**bad)


def test_los_time_and_next_change():
    sch = ChannelSchedule(S, S)
    assert sch.los_time(0, 4 * S) == 2 * S
    assert sch.los_time(S // 2, 5 * S // 2) == S
    assert sch.next_change(0) == S
    assert sch.next_los_start(int(1.2 * S)) == 2 * S
    assert ChannelSchedule.always(NLOS).next_los_start(0) is None


def test_credit_matches_rational_oracle():
    ch = Channel(ChannelSchedule.always(), SlotStructure())
    n = 8 * 5000
    ref = credits_oracle("CCDDDUUU", 1.12, n)
    got = [ch.slot_credit(k) for k in range(n)]
    assert got == ref
    per_cycle = [sum(got[i:i + 8]) for i in range(0, n, 8)]
    assert set(per_cycle) == {8, 9}


def test_accumulator_long_run_mean():
    ch = Channel(ChannelSchedule.always(), SlotStructure())
    cycles = 100_000
    total = sum(ch.slot_credit(k) for k in range(8 * cycles))
    assert abs(Fraction(total, 8 * cycles) - Fraction("1.12")) < Fraction(1, 10**9)


def test_capacity_zero_outside_los_d_slots():
    ch = Channel(ChannelSchedule(S, S), SlotStructure())
    k_nlos = (S + S // 2) // ch.slot_ns
    for k in range(k_nlos, k_nlos + 16):
        assert ch.downlink_capacity(k) == 0
    for k in range(0, 16):
        if ch.slot_kind(k) != "D":
            assert ch.downlink_capacity(k) == 0
    with pytest.raises(ValueError):
        ch.downlink_capacity(-1)


def test_delivery_latency_and_boundary():
    ch = Channel(ChannelSchedule(S, S), SlotStructure())
    assert ch.attempt_delivery(2) == 125_000
    boundary = S // ch.slot_ns
    assert ch.attempt_delivery(boundary) is None
    assert ch.attempt_delivery(boundary - 1) == 125_000


def test_burst_of_nlos_launches_all_lost():
    # 20 segments launched across a 10-slot outage
    sch = ChannelSchedule(intervals=[(1000 * 125_000, LOS), (10 * 125_000, NLOS), (S, LOS)])
    ch = Channel(sch, SlotStructure())
    lost = sum(1 for k in range(1000, 1010) for _ in range(2) if ch.attempt_delivery(k) is None)
    assert lost == 20


def test_uplink_slot_lookup():
    ch = Channel(ChannelSchedule.always(), SlotStructure())
    for k in range(32):
        u = ch.next_uplink_slot(k)
        assert ch.slot_kind(u) == "U" and 0 <= u - k < 8
        d = ch.next_downlink_slot(k)
        assert ch.slot_kind(d) == "D" and 0 <= d - k < 8


def test_los_throughput():
    ch = Channel(ChannelSchedule.always(), SlotStructure())
    assert ch.los_throughput_bps() == pytest.approx(los_capacity_bps(), rel=1e-12)
    assert ch.los_throughput_bps() == pytest.approx(100.352e6, rel=1e-12)


def test_csi_delay_view():
    ch = Channel(ChannelSchedule(S, S), SlotStructure(), csi_delay_slots=10)
    edge = S // ch.slot_ns
    assert ch.scheduler_sees_los(edge + 9)
    assert not ch.scheduler_sees_los(edge + 10)


def test_slot_structure_validation():
    for kw in (dict(slot_ns=0), dict(tdd_pattern=""), dict(tdd_pattern="CCUU"),
               dict(tdd_pattern="CCDD"), dict(tdd_pattern="CXDU"), dict(alpha=0)):
        with pytest.raises(ValueError):
            SlotStructure(**kw)


def test_faster_link_rate():
    ch = Channel(ChannelSchedule.always(), SlotStructure(), link_rate=11.2)
    assert [ch.slot_credit(k) for k in range(8)] == [0, 0, 29, 30, 30, 0, 0, 0]
    assert sum(ch.slot_credit(k) for k in range(8000)) == 89600
