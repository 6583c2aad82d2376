import json
from pathlib import Path

import pytest

from imftbounds.cli import RunConfig, main, parse_sweep

PROBLEMS = Path(__file__).resolve().parents[1] / "problems"


def _run(tmp_path, *args, name="out.json"):
    out = tmp_path / name
    code = main([*args, "-o", str(out)])
    return code, (json.loads(out.read_text()) if out.exists() else None), out


def test_qcqp_report(tmp_path):
    code, rep, _ = _run(tmp_path, "qcqp", "-i", str(PROBLEMS / "qcqp_example.json"), "--eps-x", "0.86")
    assert code == 0
    assert rep["margin"]["r_u"] == pytest.approx(1.546, abs=1e-3)
    assert rep["certificate"]["method"] == "ImftC2"


def test_deterministic_bytes(tmp_path):
    args = ("imft", "-i", str(PROBLEMS / "sqrt.json"))
    _, _, out = _run(tmp_path, *args)
    first = out.read_bytes()
    _run(tmp_path, *args)
    assert out.read_bytes() == first


def test_sweep_csv(tmp_path):
    csv = tmp_path / "curve.csv"
    code, _, _ = _run(tmp_path, "qcqp", "-i", str(PROBLEMS / "qcqp_example.json"), "--eps-x", "0.5",
                      "--sweep", "eps_x:0.1:1.0:10", "--csv", str(csv))
    assert code == 0
    raw = csv.read_bytes()
    assert raw.count(b"\r\n") == 11
    last = raw.decode().strip().splitlines()[-1]
    assert last.endswith(",")


def test_empty_region_exit(tmp_path):
    code, rep, _ = _run(tmp_path, "imft", "-i", str(PROBLEMS / "empty_region.json"))
    assert code == 2
    assert rep["certificate"]["eps_x"] == 0 and "error" in rep


def test_missing_input(tmp_path):
    code, _, _ = _run(tmp_path, "imft", "-i", str(tmp_path / "nope.json"))
    assert code == 1


def test_bad_tau(tmp_path):
    code, _, _ = _run(tmp_path, "imft", "-i", str(PROBLEMS / "sqrt.json"), "--tau", "0.5")
    assert code == 1


def test_verify_roundtrip(tmp_path):
    code, _, first = _run(tmp_path, "ift", "-i", str(PROBLEMS / "planar_inverse.json"), name="r.json")
    assert code == 0
    code, rep, _ = _run(tmp_path, "verify", "-i", str(first), "--x-samples", "100", name="v.json")
    assert code == 0 and rep["verification"]["passed"]


@pytest.mark.parametrize("cmd,fname", [("riccati", "double_integrator.json"), ("fblin", "fblin_example.json")])
def test_other_commands(tmp_path, cmd, fname):
    code, rep, _ = _run(tmp_path, cmd, "-i", str(PROBLEMS / fname))
    assert code == 0 and rep["certificate"]["eps_x"] > 0


def test_parse_sweep():
    name, grid = parse_sweep("eps_x:0:1:5")
    assert name == "eps_x" and grid == [0.0, 0.25, 0.5, 0.75, 1.0]
    with pytest.raises(ValueError):
        parse_sweep("eps_y:0:1:5")


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig("nope")
