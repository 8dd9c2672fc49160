import math

from hypothesis import given
from hypothesis import strategies as st

from delaystab._format import fmt, parse


@given(st.floats(allow_nan=False))
def test_float_round_trip_is_stable(x):
    text = fmt(x)
    assert fmt(parse(text)) == text


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_close_after_round_trip(x):
    y = parse(fmt(x))
    assert math.isclose(y, x, rel_tol=1e-12, abs_tol=0.0) or x == y


@given(st.one_of(st.integers(), st.booleans(), st.none()))
def test_exact_round_trip_for_markers_and_integers(v):
    assert parse(fmt(v)) == v and type(parse(fmt(v))) is type(v)


def test_markers():
    assert fmt(math.inf) == "inf" and fmt(None) == "undefined"
    assert fmt(math.log(3.0)) == "1.098612288668"
    assert fmt(0.0) == "0" and fmt(-0.0) == "0"
