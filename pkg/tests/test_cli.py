import csv
import io
import json
import subprocess
import sys

import pytest

from singherm import cli
from singherm.symbolic import RationalExpr, RationalMatrix

REGULARIZE_COLUMNS = ["nu", "sup_err", "monotone", "delta_emp", "l2_dh", "pairing_re", "pairing_im",
                      "cauchy_increment"]
ANALYZE_COLUMNS = ["test", "point_count", "worst_margin", "worst_location", "verdict"]


def run(args, tmp_path, name="out"):
    out = tmp_path / name
    code = cli.main(args + ["--out", str(out)])
    return code, out.read_text() if out.exists() else None


def _csv(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_run_config_requires_seed():
    with pytest.raises(TypeError):
        cli.RunConfig()
    with pytest.raises(cli.UsageError):
        cli.RunConfig(seed=0, tol=0.0)
    with pytest.raises(cli.UsageError):
        cli.RunConfig(seed="x")


def test_verify_counterexample_default(tmp_path):
    code, text = run(["verify-counterexample"], tmp_path)
    assert code == 0
    rep = json.loads(text)
    assert rep["schema_version"] == cli.SCHEMA_VERSION
    assert rep["exact"] and rep["growth_ok"] and rep["passed"]


def test_verify_counterexample_corrupted(tmp_path):
    z, zb = RationalExpr.z(1), RationalExpr.zbar(1)
    bad = RationalMatrix([[1 + z * zb, z], [zb, 1 + z * zb]], 1, hermitian=True)
    cfg = cli.RunConfig(seed=0, out=str(tmp_path / "bad.json"), annuli=2, grid=64)
    assert cli.cmd_verify_counterexample(cfg, h=bad) == 1
    assert json.loads((tmp_path / "bad.json").read_text())["exact"] is False


@pytest.mark.parametrize("args", [["analyze", "--bogus"], ["frobnicate"], ["analyze", "--metric", "nope"],
                                  ["analyze", "--grid", "7"], ["analyze", "--tol", "-1"],
                                  ["analyze", "--metric", "paper-counterexample", "--rank", "3"],
                                  ["analyze", "--param", "q=1"], []])
def test_usage_errors(args, capsys):
    assert cli.main(args) == 2


def test_analyze_identity(tmp_path):
    code, text = run(["analyze", "--metric", "identity", "--grid", "32", "--format", "csv"], tmp_path)
    rows = _csv(text)
    assert code == 0
    assert list(rows[0].keys()) == ["schema_version"] + ANALYZE_COLUMNS
    assert {r["test"] for r in rows} >= {"griffiths", "nakano", "log_det_psh"}
    assert all(r["verdict"] == "pass" and float(r["worst_margin"]) == 0 for r in rows)


def test_analyze_gauss(tmp_path):
    code, text = run(["analyze", "--metric", "gauss-neg", "--grid", "64"], tmp_path)
    rep = json.loads(text)
    assert code == 0 and rep["griffiths"]["empirical_delta"] == pytest.approx(1.0, rel=0.02)
    code, text = run(["analyze", "--metric", "gauss-pos", "--grid", "64"], tmp_path)
    rep = json.loads(text)
    assert code == 1 and not rep["griffiths"]["passed"]


def test_regularize_columns_and_constant_metric(tmp_path):
    code, text = run(["regularize", "--metric", "identity", "--grid", "64", "--nu-start", "4",
                      "--format", "csv"], tmp_path)
    rows = _csv(text)
    assert code == 0 and len(rows) == 4
    assert list(rows[0].keys())[1:9] == REGULARIZE_COLUMNS
    for r in rows:
        for c in ("sup_err", "delta_emp", "l2_dh", "pairing_re", "pairing_im"):
            assert abs(float(r[c])) < 1e-12
        assert r["monotone"] == "1"


def test_regularize_lelong_demo(tmp_path):
    code, text = run(["regularize", "--metric", "lelong", "--grid", "256", "--radius", "1",
                      "--nu-start", "2", "--nu-steps", "4"], tmp_path)
    rep = json.loads(text)
    assert code == 0 and rep["monotonicity"]["passed"]
    assert not rep["demo_test_function"]["in_hypothesis"]
    import math
    assert rep["rows"][-1]["demo_re"] == pytest.approx(-2 * math.pi, rel=0.05)


def test_regularize_counterexample_stabilizes(tmp_path):
    code, text = run(["regularize", "--metric", "counterexample", "--grid", "128", "--radius", "1",
                      "--format", "csv"], tmp_path)
    rows = _csv(text)
    assert code == 0 and all(r["monotone"] == "1" for r in rows)
    inc = [float(r["cauchy_increment"]) for r in rows[1:]]
    assert all(b < a for a, b in zip(inc, inc[1:]))


def test_psh_and_nakano_commands(tmp_path):
    assert run(["psh-test", "--metric", "fubini+", "--grid", "64"], tmp_path)[0] == 0
    assert run(["psh-test", "--metric", "gauss-pos", "--grid", "64"], tmp_path)[0] == 1
    code, text = run(["nakano-test", "--metric", "cont-nakano", "--grid", "64", "--delta", "0.9"], tmp_path)
    assert code == 0
    assert len(json.loads(text)["result"]["part_ii"]) == 4


def test_export(tmp_path):
    code, text = run(["export", "--metric", "fubini+", "--grid", "8", "--format", "csv"], tmp_path)
    rows = _csv(text)
    assert code == 0 and len(rows) == 64
    assert float(rows[0]["h11_re"]) == pytest.approx(1 + 0.5 ** 2 + 0.5 ** 2)


@pytest.mark.parametrize("args", [
    ["analyze", "--metric", "fubini-", "--grid", "32"],
    ["psh-test", "--metric", "paper-counterexample", "--grid", "32", "--seed", "5"],
    ["regularize", "--metric", "lelong", "--grid", "64", "--format", "csv"],
    ["verify-counterexample", "--annuli", "3", "--grid", "64"],
])
def test_byte_identical_outputs(args, tmp_path):
    _, a = run(args, tmp_path, "a")
    _, b = run(args, tmp_path, "b")
    assert a == b
    assert sorted(p.name for p in tmp_path.iterdir()) == ["a", "b"]


def test_csv_float_format(tmp_path):
    _, text = run(["regularize", "--metric", "lelong", "--grid", "64", "--format", "csv"], tmp_path)
    row = _csv(text)[1]
    assert len(row["sup_err"].replace(".", "").replace("-", "").split("e")[0].lstrip("0")) <= 17
    assert float(row["sup_err"]) == float(repr(float(row["sup_err"])))


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "singherm.cli", "analyze", "--metric", "nope"],
                         capture_output=True, text=True)
    assert res.returncode == 2 and "unknown metric" in res.stderr
