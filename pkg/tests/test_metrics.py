import pytest

from mmpep.core.engine import NS_PER_MS, NS_PER_S
from mmpep.core.metrics import MetricsRecorder


def test_rate_of_full_cap_second():
    m = MetricsRecorder()
    for i in range(8928):
        m.on_app_delivery(i * 112_000, i)
    assert m.rate(0, NS_PER_S) == pytest.approx(99.9936e6, abs=1)


def test_window_is_half_open():
    m = MetricsRecorder()
    m.on_app_delivery(0, 0)
    m.on_app_delivery(NS_PER_S, 1)
    assert m.delivered_between(0, NS_PER_S) == 1
    assert m.delivered_between(NS_PER_S, 2 * NS_PER_S) == 1


def test_delivery_ratio():
    m = MetricsRecorder()
    assert m.delivery_ratio() is None
    for q in range(8):
        m.on_tcp_arrival(q, q, False)
        m.on_app_delivery(q, q)
    m.on_tcp_arrival(9, 3, True)
    m.on_tcp_arrival(10, 4, True)
    assert m.delivery_ratio() == pytest.approx(0.8)
    assert m.duplicate_arrivals == 2


def test_series_conserves_bits():
    m = MetricsRecorder(bin_ns=250 * NS_PER_MS)
    times = [0, 10, 300 * NS_PER_MS, 999 * NS_PER_MS, 1_100 * NS_PER_MS]
    for i, t in enumerate(times):
        m.on_app_delivery(t, i)
    dur = 1_200 * NS_PER_MS
    series = m.rate_series(dur)
    assert len(series) == 5
    widths = [250 * NS_PER_MS] * 4 + [200 * NS_PER_MS]
    bits = sum(r * w / NS_PER_S for r, w in zip(series, widths))
    assert bits == pytest.approx(m.total_bits())


def test_order_violation_counted():
    m = MetricsRecorder()
    m.on_app_delivery(0, 1)
    assert m.order_violations == 1


def test_bad_windows():
    m = MetricsRecorder()
    with pytest.raises(ValueError):
        m.rate(5, 5)
    with pytest.raises(ValueError):
        MetricsRecorder(bin_ns=0)
