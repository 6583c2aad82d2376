import json
import time

import numpy as np
import pytest

from conftest import needs_cases
from imftbounds.corpus import TWO_BUS_CASE, TWO_BUS_LOADED
from imftbounds.errors import ParseError, ValidationError, ZeroImpedanceBranch
from imftbounds.powerflow import (build_pf_qcqp, build_ybus, find_case_file, format_case, load_case,
                                  parse_case, pf_margin_row, power_balance_residual, solve_power_flow)


def test_parse_two_bus():
    c = parse_case(TWO_BUS_CASE, "two_bus")
    assert len(c.buses) == 2 and len(c.gens) == 1 and len(c.branches) == 1
    assert c.slack.id == 1


def test_two_bus_flat_start():
    pf = build_pf_qcqp(parse_case(TWO_BUS_CASE))
    x = solve_power_flow(pf)
    assert np.allclose(pf.voltages(x)[1], 1.0, atol=1e-9)


def test_two_bus_loaded_balance():
    pf = build_pf_qcqp(parse_case(TWO_BUS_LOADED))
    x = solve_power_flow(pf)
    assert abs(power_balance_residual(pf, x)) < 1e-9


def test_ybus_two_bus():
    G, B = build_ybus(parse_case(TWO_BUS_CASE))
    assert np.allclose(G, 0.0)
    assert np.allclose(B, [[-10.0, 10.0], [10.0, -10.0]])


def test_zero_impedance():
    text = TWO_BUS_CASE.replace("1\t2\t0\t0.1", "1\t2\t0\t0")
    with pytest.raises(ZeroImpedanceBranch):
        build_ybus(parse_case(text))


def test_parse_error_line_number():
    text = TWO_BUS_CASE.replace("2\t1\t0\t0\t0\t0\t1", "2\t1\tabc\t0\t0\t0\t1")
    with pytest.raises(ParseError) as err:
        parse_case(text)
    assert err.value.line == 5


def test_unterminated_table():
    text = TWO_BUS_CASE.split("mpc.branch")[0] + "mpc.branch = [\n\t1\t2\t0\t0.1\t0;\n"
    with pytest.raises(ParseError):
        parse_case(text)


def test_short_row():
    text = TWO_BUS_CASE.replace("1\t2\t0\t0.1\t0\t0\t0\t0\t0\t0\t1\t-360\t360;", "1\t2\t0;")
    with pytest.raises(ParseError):
        parse_case(text)


@pytest.mark.parametrize("edit,msg", [
    (lambda t: t.replace("2\t1\t0\t0\t0\t0", "2\t3\t0\t0\t0\t0"), "slack"),
    (lambda t: t.replace("1\t2\t0\t0.1", "1\t7\t0\t0.1"), "missing"),
    (lambda t: t.replace("2\t1\t0\t0\t0\t0", "2\t4\t0\t0\t0\t0"), "unsupported"),
])
def test_validation(edit, msg):
    with pytest.raises(ValidationError, match=msg):
        parse_case(edit(TWO_BUS_CASE))


def test_disconnected():
    text = TWO_BUS_CASE.replace("2\t1\t0\t0\t0\t0\t1\t1\t0\t1\t1\t1.1\t0.9;",
                                "2\t1\t0\t0\t0\t0\t1\t1\t0\t1\t1\t1.1\t0.9;\n\t3\t1\t0\t0\t0\t0\t1\t1\t0\t1\t1\t1.1\t0.9;")
    with pytest.raises(ValidationError, match="connected"):
        parse_case(text)


def test_unknown_field_warns(caplog):
    text = TWO_BUS_CASE + "mpc.gencost = [\n\t2\t0\t0\t3\t0\t1\t0;\n];\n"
    with caplog.at_level("WARNING"):
        parse_case(text)
    assert "gencost" in caplog.text


def test_format_roundtrip():
    c = parse_case(TWO_BUS_LOADED)
    back = parse_case(format_case(c), c.name)
    assert back.buses == c.buses and back.branches == c.branches and back.gens == c.gens


def test_json_input():
    c = parse_case(TWO_BUS_LOADED)
    d = {"baseMVA": 100, "bus": [[b.id, b.type, b.pd, b.qd, b.gs, b.bs, 1, b.vm, b.va] for b in c.buses],
         "gen": [[1, 0, 0, 100, -100, 1, 100, 1]], "branch": [[1, 2, 0, 0.1, 0]]}
    cj = parse_case(json.dumps(d))
    assert [b.pd for b in cj.buses] == [b.pd for b in c.buses]


@needs_cases
def test_case9_structure():
    c = load_case(find_case_file("case9"))
    assert (len(c.buses), len(c.branches), len(c.gens)) == (9, 9, 3)
    pf = build_pf_qcqp(c)
    x = solve_power_flow(pf)
    assert abs(power_balance_residual(pf, x)) < 1e-8


@needs_cases
def test_case9_ybus_independent():
    c = load_case(find_case_file("case9"))
    G, B = build_ybus(c)
    idx = {b.id: i for i, b in enumerate(c.buses)}
    Y = np.zeros((9, 9), dtype=complex)
    for br in c.branches:
        y = 1 / complex(br.r, br.x)
        t = br.ratio or 1.0
        i, j = idx[br.f], idx[br.t]
        Y[i, i] += (y + 0.5j * br.b) / t ** 2
        Y[j, j] += y + 0.5j * br.b
        Y[i, j] -= y / t
        Y[j, i] -= y / t
    for b in c.buses:
        Y[idx[b.id], idx[b.id]] += complex(b.gs, b.bs) / c.base_mva
    assert np.max(np.abs(G + 1j * B - Y)) < 1e-10


@needs_cases
def test_case9_row_deterministic():
    c = load_case(find_case_file("case9"))
    t = time.perf_counter()
    r1, _, _ = pf_margin_row(c)
    assert time.perf_counter() - t < 30
    r2, _, _ = pf_margin_row(c)
    assert r1.values() == r2.values()
    assert r1.M_F_prime <= r1.M_F
