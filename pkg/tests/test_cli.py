from __future__ import annotations

import json
import subprocess
import sys

import pytest

from growthctl import cli
from growthctl.config import ENV_TOL
from growthctl.errors import SolverError
from growthctl.fileio import dumps, read_csv

BASE = {"k_M": 1, "k_E": 1, "a_M": 1, "a_E": 1, "b_M": 2, "b_E": 1}
# terminal nutrient jumps across zero: no vertex-arc plan satisfies the audit
RELAXED = {
    "params": {"k_M": 5.966014503119181, "k_E": 0.4832863899978032, "a_M": 25.463867270530454,
               "a_E": 10.522147449973787, "b_M": 0.22219710360472683, "b_E": 0.020416997657307104},
    "x0": [132.22302482887628, 1.842722293348068, 3.0391802901193854],
    "T": 16.688875582846617,
}


def scenario(tmp_path, T=2.0, x0=(100, 0, 1), name="s.json", **extra):
    doc = {"params": BASE, "x0": list(x0), "T": T, **extra}
    path = tmp_path / name
    path.write_text(dumps(doc))
    return str(path)


def invoke(capsys, *argv):
    code = cli.run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_classify_linear(tmp_path, capsys):
    code, out, _ = invoke(capsys, "classify", scenario(tmp_path, T=0.5))
    doc = json.loads(out)
    assert code == 0
    assert doc["regime"] == "Linear"
    assert doc["objective"] == pytest.approx(0.75, rel=1e-15)
    assert doc["certificate"]["passed"] is True


def test_classify_writes_file(tmp_path, capsys):
    out = tmp_path / "cls.json"
    code, text, _ = invoke(capsys, "classify", scenario(tmp_path), "-o", str(out), "--no-certify")
    assert code == 0 and text == ""
    doc = json.loads(out.read_text())
    assert doc["regime"] == "ExpLin"
    assert doc["tau1"] == pytest.approx(1.0, abs=1e-15)
    assert "certificate" not in doc or doc["certificate"] is None


def test_raw_and_reduced_files_agree(tmp_path, capsys):
    raw = {"kA": 4.0, "kM": 2.0, "kE": 3.0, "aM": 0.5, "aE": 0.25, "bM": 2.0, "bE": 1.0}
    a = tmp_path / "raw.json"
    a.write_text(dumps({"raw": raw, "x0": [10, 0.5, 1], "T": 3.0}))
    _, out_raw, _ = invoke(capsys, "classify", str(a), "--no-certify")
    from growthctl.fileio import parse_scenario

    params = parse_scenario(a).scenario.params.as_dict()
    b = tmp_path / "reduced.json"
    b.write_text(dumps({"params": params, "x0": [10, 0.5, 1], "T": 3.0}))
    _, out_red, _ = invoke(capsys, "classify", str(b), "--no-certify")
    assert out_raw == out_red


def test_verify_explin(tmp_path, capsys):
    costate = tmp_path / "costate.csv"
    code, out, _ = invoke(capsys, "verify", scenario(tmp_path), "--samples", "50", "--costate-csv", str(costate))
    doc = json.loads(out)
    assert code == 0
    assert doc["best"] == "ExpLin"
    assert doc["certificate"]["passed"] is True
    assert [r["structure"] for r in doc["candidates"]][-1] == "Synthesized"
    rows = read_csv(costate)
    assert list(rows[0]) == list(cli.COSTATE_HEADER)
    assert {r["active_arc"] for r in rows} == {"Exponential", "Linear"}


def test_verify_table(tmp_path, capsys):
    code, out, _ = invoke(capsys, "verify", scenario(tmp_path), "--samples", "50", "--format", "table")
    assert code == 0
    assert out.startswith("certificate: PASS")
    assert any(line.startswith("ExpLin") and line.endswith("*") for line in out.splitlines())


def test_certificate_failure_exit_code(tmp_path, capsys):
    path = tmp_path / "relaxed.json"
    path.write_text(dumps(RELAXED))
    code, out, _ = invoke(capsys, "classify", str(path), "--samples", "100")
    assert code == 1
    assert json.loads(out)["certificate"]["passed"] is False


def test_missing_file(tmp_path, capsys):
    code, _, err = invoke(capsys, "classify", str(tmp_path / "nope.json"))
    assert code == 2
    assert "nope.json" in err


def test_unknown_key_names_line(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "params": {"k_M": 1, "k_E": 1, "a_M": 1, "a_E": 1, "b_M": 2, "b_E": 1},\n'
                    '  "x0": [1, 0, 1],\n  "T": 1,\n  "horizon": 2\n}\n')
    code, out, err = invoke(capsys, "classify", str(path))
    assert code == 2 and out == ""
    assert "line 5, field 'horizon'" in err


@pytest.mark.parametrize("argv", [
    ["frobnicate"],
    ["classify"],
    ["simulate", "{s}", "--dt", "-1"],
    ["oracle", "{s}", "--nodes", "0"],
    ["sweep", "{s}", "--axis1", "T=1:2:3", "--axis2", "colour=1:2:3"],
    ["sweep", "{s}", "--axis1", "T=1:2", "--axis2", "b_M=1:2:3"],
    ["sweep", "{s}", "--axis1", "T=1:2:3", "--axis2", "T=1:2:3"],
])
def test_input_errors(tmp_path, capsys, argv):
    s = scenario(tmp_path)
    code, _, _ = invoke(capsys, *[a.format(s=s) for a in argv])
    assert code == 2


def test_solver_failure_exit_code(tmp_path, capsys, monkeypatch):
    def broken(*args, **kwargs):
        raise SolverError("iteration limit reached")

    monkeypatch.setattr(cli, "classify", broken)
    code, _, err = invoke(capsys, "classify", scenario(tmp_path))
    assert code == 3
    assert "iteration limit" in err


def test_env_tolerance_moves_boundary(tmp_path, capsys, monkeypatch):
    s = scenario(tmp_path, T=0.95)
    monkeypatch.delenv(ENV_TOL, raising=False)
    assert json.loads(invoke(capsys, "classify", s, "--no-certify")[1])["regime"] == "Linear"
    monkeypatch.setenv(ENV_TOL, "0.1")
    assert json.loads(invoke(capsys, "classify", s, "--no-certify")[1])["regime"] == "ExpLin"
    # an explicit flag beats the environment
    assert json.loads(invoke(capsys, "classify", s, "--no-certify", "--tol", "0")[1])["regime"] == "Linear"


def test_file_config_tolerance(tmp_path, capsys):
    s = scenario(tmp_path, T=0.95, config={"tol": 0.1})
    assert json.loads(invoke(capsys, "classify", s, "--no-certify")[1])["regime"] == "ExpLin"


def test_simulate_csv(tmp_path, capsys):
    out = tmp_path / "traj.csv"
    code, _, _ = invoke(capsys, "simulate", scenario(tmp_path), "--dt", "0.25", "-o", str(out))
    assert code == 0
    raw = out.read_bytes()
    assert b"\r" not in raw
    assert raw.startswith(b"t,x_N,x_M,x_E,u_M,u_E,biomass\n")
    rows = read_csv(out)
    assert [float(r["t"]) for r in rows] == [0.25 * k for k in range(9)]
    assert float(rows[0]["u_E"]) == 1.0 and float(rows[-1]["u_M"]) == 1.0
    # E then L from x_E = 1: x_E(1) = e, then x_M grows at rate e
    assert float(rows[-1]["x_M"]) == pytest.approx(2.718281828459045, rel=1e-15)


def test_simulate_appends_horizon(tmp_path, capsys):
    code, out, _ = invoke(capsys, "simulate", scenario(tmp_path, T=1.0), "--dt", "0.3")
    assert code == 0
    times = [line.split(",")[0] for line in out.splitlines()[1:]]
    assert times[-2:] == ["0.89999999999999991", "1"]


def test_outputs_are_byte_identical(tmp_path, capsys):
    s = scenario(tmp_path)
    for argv in (["classify", s], ["simulate", s], ["verify", s, "--samples", "20"]):
        first = invoke(capsys, *argv)[1]
        assert invoke(capsys, *argv)[1] == first


def test_oracle_json_and_listing(tmp_path, capsys):
    listing = tmp_path / "lp.txt"
    code, out, _ = invoke(capsys, "oracle", scenario(tmp_path, T=0.5), "--nodes", "50", "--dump-lp", str(listing))
    doc = json.loads(out)
    assert code == 0
    assert set(doc) == {"nodes", "objective", "analytic", "gap", "iterations",
                        "bang_bang_fraction", "pattern", "degenerate_nodes"}
    assert doc["nodes"] == 50 and doc["pattern"] == ["Linear"]
    assert abs(doc["gap"]) <= 1e-12  # forward Euler is exact on a linear arc
    text = listing.read_text()
    assert text.startswith("maximize\n") and text.endswith("end\n")


def test_sweep_csv(tmp_path, capsys):
    out = tmp_path / "map.csv"
    code, _, _ = invoke(capsys, "sweep", scenario(tmp_path), "--axis1", "T=0.5:2:4",
                        "--axis2", "b_E=0.5:1:2", "--workers", "1", "-o", str(out))
    assert code == 0
    assert out.read_bytes().startswith(b"param1,param2,regime,tau1,tau_s,objective\n")
    rows = read_csv(out)
    assert len(rows) == 8
    assert rows[0]["regime"] == "Linear" and rows[0]["tau1"] == ""
    assert {r["regime"] for r in rows} <= {"Linear", "ExpLin"}


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "growthctl", "classify", scenario(tmp_path, T=0.5), "--no-certify"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["regime"] == "Linear"
