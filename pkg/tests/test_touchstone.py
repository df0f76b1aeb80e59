import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bcplink import touchstone as ts
from bcplink.network import PortImpedances, abcd_to_s, s_to_abcd

# Hand-written two-port file.  Columns: f S11 S21 S12 S22, every entry distinct.
FIXTURE = """! measured link, port 1 = TX electrodes
! second comment
# GHz S RI R 50
1.0  0.10 0.01  0.50 -0.20  0.05 0.02  0.30 -0.03
2.0  0.11 0.02  0.40 -0.25  0.04 0.03  0.31 -0.04   ! inline note
"""


def test_column_order():
    t = ts.parse_touchstone(FIXTURE)
    assert t.freqs == (1e9, 2e9)
    assert t.s11[0] == complex(0.10, 0.01)
    assert t.s21[0] == complex(0.50, -0.20)
    assert t.s12[0] == complex(0.05, 0.02)
    assert t.s22[0] == complex(0.30, -0.03)
    assert t.s21[0] != t.s12[0]
    assert t.comments == ("measured link, port 1 = TX electrodes", "second comment", "inline note")


def test_column_order_survives_abcd():
    t = ts.parse_touchstone(FIXTURE)
    s = ts.table_to_channel(t, 1e9)
    back = abcd_to_s(s_to_abcd(s), PortImpedances(50, 50))
    assert back.s21 == pytest.approx(complex(0.50, -0.20), rel=1e-12)
    assert back.s12 == pytest.approx(complex(0.05, 0.02), rel=1e-12)


def test_ghz_and_hz_option_lines_agree():
    hz = FIXTURE.replace("# GHz", "# Hz").replace("\n1.0 ", "\n1e9 ").replace("\n2.0 ", "\n2e9 ")
    mhz = FIXTURE.replace("# GHz", "# MHz").replace("\n1.0 ", "\n1000 ").replace("\n2.0 ", "\n2000 ")
    a, b, c = (ts.parse_touchstone(x) for x in (FIXTURE, hz, mhz))
    assert a.same_values(b) and a.same_values(c)
    assert (a.source_unit, b.source_unit, c.source_unit) == ("GHz", "Hz", "MHz")


def test_ma_and_db_formats():
    ma = ts.parse_touchstone("# MHz S MA R 50\n100 1 90 0.5 0 0.5 0 1 -90\n")
    assert ma.s11[0] == pytest.approx(1j, abs=1e-15)
    assert ma.s22[0] == pytest.approx(-1j, abs=1e-15)
    db = ts.parse_touchstone("# MHz S DB R 50\n100 -20 0 -6.0206 180 0 0 0 0\n")
    assert db.s11[0] == pytest.approx(0.1, rel=1e-12)
    assert db.s21[0] == pytest.approx(-0.5, rel=1e-4)


def test_option_line_defaults():
    t = ts.parse_touchstone("#\n1 0.5 0 0.5 0 0.5 0 0.5 0\n")
    assert (t.source_unit, t.source_format, t.r_ref, t.freqs) == ("GHz", "MA", 50.0, (1e9,))


@pytest.mark.parametrize("text, line, msg", [
    ("# GHz S RI R 50\n[Version] 2.0\n", 2, "version 2"),
    ("# GHz Z RI R 50\n", 1, "only S-parameter"),
    ("# GHz S RI R\n", 1, "R needs"),
    ("# GHz S RI R 50 junk\n", 1, "unknown token"),
    ("# GHz S RI R 50\n1 0 0 0 0 0 0 0\n", 2, "expected 9"),
    ("# GHz S RI R 50\n1 0 0\n", 2, "one-port"),
    ("# GHz S RI R 50\n1 0 0 0 0 0 0 0 x\n", 2, "malformed"),
    ("# GHz S RI R 50\n2 0 0 0 0 0 0 0 0\n1 0 0 0 0 0 0 0 0\n", 3, "increasing"),
    ("1 0 0 0 0 0 0 0 0\n", 1, "before the option"),
    ("# GHz S RI R 50\n# GHz S RI R 50\n", 2, "second option"),
])
def test_parse_errors_carry_line_numbers(text, line, msg):
    with pytest.raises(ts.TouchstoneError, match=msg) as err:
        ts.parse_touchstone(text)
    assert err.value.line == line


def test_missing_option_line_and_empty_table():
    with pytest.raises(ts.TouchstoneError, match="missing option"):
        ts.parse_touchstone("! nothing\n")
    empty = ts.parse_touchstone("# GHz S RI R 50\n")
    assert len(empty) == 0
    with pytest.raises(ValueError):
        ts.write_touchstone(empty)
    with pytest.raises(ValueError):
        ts.table_to_channel(empty, 1e9)


finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False, allow_infinity=False)
cplx = st.builds(complex, finite, finite)


@st.composite
def tables(draw):
    n = draw(st.integers(min_value=1, max_value=8))
    steps = draw(st.lists(st.floats(min_value=1e-3, max_value=1e9), min_size=n, max_size=n))
    f0 = draw(st.floats(min_value=1.0, max_value=1e10))
    freqs = list(np.cumsum([f0] + steps[1:]))
    if any(b <= a for a, b in zip(freqs, freqs[1:])):
        freqs = [f0 * (k + 1) for k in range(n)]
    cols = [draw(st.lists(cplx, min_size=n, max_size=n)) for _ in range(4)]
    r_ref = draw(st.floats(min_value=1.0, max_value=1e3))
    comments = draw(st.lists(st.text(alphabet="abc xyz=0123", max_size=12).map(str.strip), max_size=3))
    return ts.FrequencyTable(tuple(freqs), *cols, r_ref=r_ref, comments=tuple(comments))


@given(tables())
def test_round_trip_is_value_identical(table):
    once = ts.parse_touchstone(ts.write_touchstone(table))
    assert once.same_values(table)
    twice = ts.parse_touchstone(ts.write_touchstone(once))
    assert twice.same_values(once)
    assert ts.write_touchstone(twice) == ts.write_touchstone(once)


def test_ma_writer_round_trip_is_close():
    t = ts.parse_touchstone(FIXTURE)
    back = ts.parse_touchstone(ts.write_touchstone(t, "MA"))
    for a, b in zip(t.rows(), back.rows()):
        assert np.allclose(a, b, rtol=1e-14, atol=1e-16)


def test_interpolation_and_extrapolation():
    t = ts.parse_touchstone(FIXTURE)
    mid = ts.table_to_channel(t, 1.5e9)
    assert mid.s21 == pytest.approx(complex(0.45, -0.225), rel=1e-12)
    assert mid.refs == PortImpedances(50, 50)
    with pytest.raises(ValueError, match="extrapolation"):
        ts.table_to_channel(t, 2.5e9)
    r = ts.resample(t, [1e9, 1.25e9, 2e9])
    assert r.freqs == (1e9, 1.25e9, 2e9) and r.s11[0] == t.s11[0] and r.comments == t.comments


def test_table_from_abcd():
    from bcplink.network import series_element
    blocks = [series_element(50, f) for f in (1e9, 2e9)]
    t = ts.table_from_abcd(blocks)
    assert t.s21[0] == pytest.approx(2 / 3) and t.s11[0] == pytest.approx(1 / 3)


def test_table_validation():
    with pytest.raises(ValueError):
        ts.FrequencyTable((1.0, 1.0), (0, 0), (0, 0), (0, 0), (0, 0))
    with pytest.raises(ValueError):
        ts.FrequencyTable((1.0,), (0,), (0,), (0,), (0, 0))
    with pytest.raises(ValueError):
        ts.FrequencyTable((1.0,), (0,), (0,), (0,), (0,), r_ref=0)


def test_polar_helper_matches_cmath():
    z = ts._pair(2.0, 30.0, "MA")
    assert z == pytest.approx(cmath.rect(2.0, math.pi / 6), rel=1e-15)
