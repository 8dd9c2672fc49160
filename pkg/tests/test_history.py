import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from delaystab.errors import ContractError, HistoryUnderrun
from delaystab.history import HistoryBuffer


def test_node_values_are_exact():
    buf = HistoryBuffer.from_function(lambda t: np.array([np.sin(3 * t), t ** 2]), 1.0, n=37)
    for t, s in zip(buf.times, buf.states):
        assert buf.sample(t) is s


def test_linear_midpoint():
    buf = HistoryBuffer(1.0, interpolation="linear")
    buf.record(0.0, np.array([1.0, -2.0]))
    buf.record(1.0, np.array([3.0, 4.0]))
    assert np.array_equal(buf.sample(0.5), np.array([2.0, 1.0]))


def test_hermite_sine_accuracy():
    buf = HistoryBuffer.from_function(np.sin, 2.0, n=200, deriv=np.cos)
    q = np.linspace(-2.0, 0.0, 1001) + 0.0031
    q = q[q <= 0.0]
    err = max(abs(buf.sample(t) - np.sin(t)) for t in q)
    assert err <= 1e-8


def test_hermite_fallback_slopes_sine():
    buf = HistoryBuffer.from_function(np.sin, 2.0, n=200)
    err = max(abs(buf.sample(t) - np.sin(t)) for t in np.linspace(-1.995, -0.005, 97))
    assert err <= 1e-5


def test_hermite_reproduces_cubics_with_derivatives():
    f = lambda t: 2 * t ** 3 - t + 0.5
    df = lambda t: 6 * t ** 2 - 1
    buf = HistoryBuffer.from_function(f, 1.0, n=3, deriv=df)
    for t in np.linspace(-1.0, 0.0, 23):
        assert buf.sample(t) == pytest.approx(f(t), abs=1e-13)


def test_record_monotonicity():
    buf = HistoryBuffer(1.0)
    buf.record(0.9, np.zeros(1))
    buf.record(1.0, np.zeros(1))
    with pytest.raises(ContractError):
        buf.record(0.8, np.zeros(1))
    with pytest.raises(ContractError):
        buf.record(1.0, np.zeros(1))


def test_underrun_error():
    buf = HistoryBuffer.constant([1.0], 1.0)
    with pytest.raises(HistoryUnderrun, match="history underrun"):
        buf.sample(-1.5)
    with pytest.raises(HistoryUnderrun):
        buf.sample(0.1)


def test_trim_example():
    buf = HistoryBuffer(1.0, h_retain=0.01)
    for t in np.arange(0, 1001) * 0.01:
        buf.record(float(t), np.array([t]))
    buf.trim()
    assert buf.t_now == pytest.approx(10.0)
    assert min(buf.times) >= 8.98 - 1e-9 - 0.01
    assert sum(t < 8.98 - 1e-9 for t in buf.times) <= 1
    assert buf.sample(9.0)[0] == pytest.approx(9.0)


@settings(max_examples=40)
@given(st.floats(0.05, 2.0), st.floats(0.001, 0.05), st.integers(50, 400))
def test_trim_keeps_reachable_span(tau, h, n):
    buf = HistoryBuffer(tau, h_retain=h)
    for k in range(n):
        buf.record(k * h, np.array([np.cos(k * h)]))
        if k % 7 == 0:
            buf.trim()
    buf.trim()
    lo = max(0.0, buf.t_now - tau)
    for t in np.linspace(lo, buf.t_now, 13):
        buf.sample(t)


def test_determinism():
    def build():
        buf = HistoryBuffer(1.0)
        for t in np.linspace(0, 1, 17):
            buf.record(float(t), np.array([np.exp(t), t]))
        return buf
    a, b = build(), build()
    for t in np.linspace(0, 1, 101):
        assert np.array_equal(a.sample(t), b.sample(t))


def test_constant_history_and_copy():
    buf = HistoryBuffer.constant([1.0, 2.0], 0.5)
    assert np.array_equal(buf.sample(-0.25), [1.0, 2.0])
    c = buf.copy()
    c.record(0.1, np.array([0.0, 0.0]))
    assert len(buf) == 2 and len(c) == 3


def test_csv_round_trip(tmp_path):
    path = tmp_path / "hist.csv"
    ts = np.linspace(-1.0, 0.0, 41)
    with open(path, "w") as fh:
        fh.write("t,c0,c1\n")
        for t in ts:
            fh.write(f"{float(t)!r},{float(np.sin(t))!r},{float(t * t)!r}\n")
    buf = HistoryBuffer.from_csv(path, n=200)
    assert buf.t_start == -1.0 and buf.t_now == 0.0
    for t in (-0.77, -0.31, -0.02):
        assert buf.sample(t) == pytest.approx([np.sin(t), t ** 2], abs=1e-6)


def test_table_must_cover_span():
    with pytest.raises(ContractError):
        HistoryBuffer.from_table([-0.5, 0.0], [1.0, 1.0], tau_max=1.0)
    with pytest.raises(ContractError):
        HistoryBuffer.from_table([-1.0, -1.0, 0.0], [1.0, 1.0, 1.0])
