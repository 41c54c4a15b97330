"""Case script parsing, phasor tables, matrix documents, channel conversions."""

import logging
import math

import numpy as np
import pytest

from gridid.errors import MeasurementError, ParseError, ValidationError
from gridid.ingest import (MeasurementSet, current_to_power, ensure_currents,
                           parse_case_script, parse_phasor_table,
                           power_to_current, read_matrix, write_matrix,
                           write_phasor_table)
from gridid.netmodel import AdmittanceMatrix

MINIMAL_CASE = """
function mpc = tiny
mpc.baseMVA = 100;
mpc.bus = [
    1 3 0  0 0 0 1 1.0 0 0 1 1.1 0.9;
    2 1 10 5 0 0 1 1.0 0 0 1 1.1 0.9;
];
mpc.gen = [
    1 0 0 99 -99 1.0 100 1 250 10;
];
mpc.branch = [
    1 2 0.01 0.1 0.0 0 0 0 0 0 1;
];
"""


# ---------------------------------------------------------------------------
# Case scripts
# ---------------------------------------------------------------------------

def test_case14_tables(case14):
    assert case14.n == 14
    assert case14.base_power == 100.0
    assert case14.bus_ids == tuple(str(k) for k in range(1, 15))
    kinds = [b.kind for b in case14.buses]
    assert kinds.count("slack") == 1
    assert case14.slack_index == 0
    assert kinds.count("pv") == 4  # buses 2, 3, 6, 8
    assert len(case14.branches) == 20
    assert len(case14.generators) == 5

    # off-nominal taps sit on the three transformer branches
    taps = {(b.from_bus, b.to_bus): b.tap for b in case14.branches if b.tap != 1.0}
    assert taps == {("4", "7"): 0.978, ("4", "9"): 0.969, ("5", "6"): 0.932}

    bus9 = case14.buses[8]
    assert bus9.shunt_b == pytest.approx(0.19)  # 19 MVAr over the 100 MVA base
    assert bus9.shunt_g == 0.0

    # loads land in per unit
    bus2 = case14.buses[1]
    assert bus2.p_load == pytest.approx(0.217)
    assert bus2.q_load == pytest.approx(0.127)

    # solved-state columns are retained for later comparison
    assert case14.buses[0].vm_solution == pytest.approx(1.06)
    assert case14.buses[3].va_solution == pytest.approx(math.radians(-10.312901092))


def test_minimal_case_roundtrip():
    case = parse_case_script(MINIMAL_CASE)
    assert case.n == 2
    assert case.buses[1].p_load == pytest.approx(0.10)
    assert case.branches[0].tap == 1.0
    assert case.generators[0].p_set == 0.0


def test_unknown_assignment_is_logged_not_fatal(caplog):
    with caplog.at_level(logging.WARNING):
        case = parse_case_script(MINIMAL_CASE.replace(
            "mpc.baseMVA", "mpc.version = '2';\nmpc.baseMVA"))
    assert case.n == 2
    assert any("version" in rec.message for rec in caplog.records)


def test_case_parse_errors():
    with pytest.raises(ParseError, match="baseMVA"):
        parse_case_script("mpc.bus = [1 3 0 0 0 0 1 1 0 0 1 1.1 0.9];")
    with pytest.raises(ParseError, match="bus table"):
        parse_case_script("mpc.baseMVA = 100;")
    with pytest.raises(ValidationError, match="slack"):
        parse_case_script(MINIMAL_CASE.replace("1 3 0  0", "1 1 0  0"))
    with pytest.raises(ValidationError, match="tap"):
        parse_case_script(MINIMAL_CASE.replace(
            "1 2 0.01 0.1 0.0 0 0 0 0 0 1", "1 2 0.01 0.1 0.0 0 0 0 -2 0 1"))
    with pytest.raises(ValidationError, match="impedance"):
        parse_case_script(MINIMAL_CASE.replace(
            "1 2 0.01 0.1 0.0 0 0 0 0 0 1", "1 2 0 0 0.0 0 0 0 0 0 1"))


def test_case_parse_error_carries_position():
    bad = MINIMAL_CASE.replace("0.01", "zz")
    with pytest.raises(ParseError) as info:
        parse_case_script(bad)
    assert info.value.line is not None


def test_out_of_service_rows_dropped():
    off = MINIMAL_CASE.replace("1 2 0.01 0.1 0.0 0 0 0 0 0 1",
                               "1 2 0.01 0.1 0.0 0 0 0 0 0 1;\n    2 1 0.02 0.2 0.0 0 0 0 0 0 0")
    case = parse_case_script(off)
    assert len(case.branches) == 1
    gen_off = MINIMAL_CASE.replace("1 0 0 99 -99 1.0 100 1 250 10",
                                   "1 0 0 99 -99 1.0 100 0 250 10;\n    1 0 0 99 -99 1.0 100 1 250 10")
    assert len(parse_case_script(gen_off).generators) == 1


# ---------------------------------------------------------------------------
# Phasor tables
# ---------------------------------------------------------------------------

def _random_measurements(rng, slots=4, buses=("a", "b", "c"), with_power=True):
    shape = (slots, len(buses))
    v = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    i = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    s = v * np.conj(i) if with_power else None
    return MeasurementSet(observed=buses, v=v, i=i, s=s)


def test_phasor_table_roundtrip_exact():
    m = _random_measurements(np.random.default_rng(11))
    back = parse_phasor_table(write_phasor_table(m))
    assert back.observed == m.observed
    assert np.array_equal(back.v, m.v)
    assert np.array_equal(back.i, m.i)
    assert np.array_equal(back.s, m.s)


def test_phasor_table_roundtrip_current_only():
    rng = np.random.default_rng(12)
    m = _random_measurements(rng, with_power=False)
    back = parse_phasor_table(write_phasor_table(m))
    assert back.s is None and np.array_equal(back.i, m.i)


def test_phasor_table_rejects_voltage_only():
    # a table whose current and power columns are all blank cannot be used
    text = ("k,bus,v_re,v_im,i_re,i_im,s_re,s_im\n"
            "0,a,1.0,0.0,,,,\n0,b,0.9,0.1,,,,\n")
    with pytest.raises(ParseError):
        parse_phasor_table(text)


def test_phasor_table_errors():
    m = _random_measurements(np.random.default_rng(13), slots=2, buses=("a", "b"))
    text = write_phasor_table(m)
    lines = text.splitlines()

    with pytest.raises(ParseError, match="header"):
        parse_phasor_table(text.replace("k,bus", "slot,bus"))
    with pytest.raises(ParseError, match="empty"):
        parse_phasor_table("")
    with pytest.raises(ParseError, match="ragged"):
        parse_phasor_table("\n".join(lines[:-1]) + "\n")
    with pytest.raises(ParseError, match="duplicate"):
        parse_phasor_table(text + lines[-1] + "\n")

    cells = lines[1].split(",")
    cells[2] = "oops"
    with pytest.raises(ParseError, match="bad number"):
        parse_phasor_table("\n".join([lines[0], ",".join(cells)] + lines[2:]) + "\n")

    # a complex cell must carry both halves
    cells = lines[1].split(",")
    cells[3] = ""
    with pytest.raises(ParseError, match="half-empty"):
        parse_phasor_table("\n".join([lines[0], ",".join(cells)] + lines[2:]) + "\n")


def test_measurement_set_validation():
    v = np.ones((2, 2), dtype=complex)
    i = np.ones((2, 2), dtype=complex)
    with pytest.raises(MeasurementError):
        MeasurementSet(observed=("a",), v=v, i=i)
    with pytest.raises(MeasurementError):
        MeasurementSet(observed=("a", "a"), v=v, i=i)
    with pytest.raises(MeasurementError):
        MeasurementSet(observed=("a", "b"), v=v, i=np.ones((3, 2), dtype=complex))
    with pytest.raises(MeasurementError, match="currents or powers"):
        MeasurementSet(observed=("a", "b"), v=v)
    with pytest.raises(MeasurementError, match="non-finite"):
        MeasurementSet(observed=("a", "b"), v=v, i=i * np.nan)


# ---------------------------------------------------------------------------
# Matrix documents
# ---------------------------------------------------------------------------

def test_matrix_document_roundtrip():
    rng = np.random.default_rng(14)
    dense = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    dense = dense + dense.T
    dense[0, 2] = dense[2, 0] = 0.0
    y = AdmittanceMatrix.from_dense(dense, ("p", "q", "r", "s", "t"))
    back = read_matrix(write_matrix(y))
    assert back.labels == y.labels
    assert np.array_equal(back.to_dense(), y.to_dense())
    assert (0, 2) not in back.entries  # explicit zeros are dropped, not stored


def test_matrix_document_errors():
    with pytest.raises(ParseError):
        read_matrix("{not json")
    with pytest.raises(ParseError, match="labels"):
        read_matrix('{"n": 3, "labels": ["a", "b"], "entries": []}')
    with pytest.raises(ParseError):
        read_matrix('{"n": 2, "labels": ["a", "b"]}')


# ---------------------------------------------------------------------------
# Channel conversions
# ---------------------------------------------------------------------------

def test_power_current_conversions_invert():
    m = _random_measurements(np.random.default_rng(15))
    from_power = power_to_current(MeasurementSet(observed=m.observed, v=m.v, s=m.s))
    assert np.allclose(from_power.i, m.i, atol=1e-12)
    from_current = current_to_power(MeasurementSet(observed=m.observed, v=m.v, i=m.i))
    assert np.allclose(from_current.s, m.s, atol=1e-12)


def test_ensure_currents():
    m = _random_measurements(np.random.default_rng(16))
    assert ensure_currents(m) is m  # currents already present: no copy
    converted = ensure_currents(MeasurementSet(observed=m.observed, v=m.v, s=m.s))
    assert np.allclose(converted.i, m.i, atol=1e-12)


def test_power_conversion_rejects_dead_bus():
    v = np.array([[1.0 + 0j, 1e-12 + 0j]])
    s = np.ones((1, 2), dtype=complex)
    with pytest.raises(MeasurementError, match="magnitude"):
        power_to_current(MeasurementSet(observed=("a", "b"), v=v, s=s))
