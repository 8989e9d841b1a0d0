import json

import pytest

from dupdel import cli, io


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _rows(text):
    lines = text.splitlines()
    assert lines[0] == io.SCHEMA_LINE
    return lines[1], lines[2:]


def test_theory_c(capsys):
    code, out, _ = run(capsys, "theory", "--theta", "0.5", "--what", "c", "--kmax", "1000")
    assert code == 0
    header, rows = _rows(out)
    assert header == "k,c_k,recursion_residual,asympt_ratio"
    assert len(rows) == 1001
    assert float(rows[0].split(",")[1]) == pytest.approx(0.403652637676806, rel=1e-13)


def test_theory_p0_columns(capsys):
    code, out, _ = run(capsys, "theory", "--theta", "0.7", "--what", "p0", "--rmax", "50")
    assert code == 0
    header, rows = _rows(out)
    assert header == "r,a_r,p0,binomial_sum_delta,asympt_ratio"
    assert rows[31].split(",")[3] == "nan"  # sum only evaluated up to r = 30
    code, out, _ = run(capsys, "theory", "--theta", "0.5", "--what", "p0", "--rmax", "5")
    header, rows = _rows(out)
    assert header == "r,a_r,p0,laguerre_delta,asympt_ratio"
    assert rows[2].split(",")[2] == repr(2 / 7)


def test_theory_json(capsys):
    code, out, _ = run(capsys, "theory", "--theta", "0.3", "--what", "tail", "--kmax", "3", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["schema_version"] == 1
    assert doc["columns"] == ["k", "tail_q", "asympt_ratio"]


def test_spec_file_defaults_and_override(tmp_path, capsys):
    spec = tmp_path / "s.json"
    spec.write_text(json.dumps({"theta": 0.3, "kmax": 2}))
    _, out, _ = run(capsys, "theory", "--spec", str(spec))
    assert len(_rows(out)[1]) == 3
    _, out2, _ = run(capsys, "theory", "--spec", str(spec), "--kmax", "4")
    assert len(_rows(out2)[1]) == 5
    spec.write_text(json.dumps({"theta": 0.3, "nonsense": 1}))
    assert run(capsys, "theory", "--spec", str(spec))[0] == 2


@pytest.mark.parametrize("argv", [
    ["theory", "--theta", "1.2"],
    ["theory", "--theta", "0.5", "--kmax", "0"],
    ["theory"],
    ["simulate", "--theta", "0.5"],
    ["simulate", "--version", "3", "--theta", "0.5", "--steps", "10"],
    ["simulate", "--theta", "0.5", "--steps", "10", "--seed", "-4"],
    ["oracle", "--theta", "0.5"],
    ["oracle", "--theta", "0.5", "--enumerate", "9"],
    ["experiment", "--spec", "/nonexistent/spec.json"],
    ["frobnicate"],
])
def test_config_errors_exit_2(argv, capsys):
    with pytest.raises(SystemExit) as info:
        code = cli.main(argv)
        raise SystemExit(code)
    assert info.value.code == 2


def test_numeric_failure_exit_4(monkeypatch, capsys):
    from dupdel import theory
    from dupdel.quadrature import QuadratureError

    def boom(*a, **k):
        raise QuadratureError("did not converge", k=3)

    monkeypatch.setattr(theory, "compute_c", boom)
    assert run(capsys, "theory", "--theta", "0.5")[0] == 4


def test_simulate_is_byte_identical(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(io.OUTPUT_DIR_ENV, str(tmp_path))
    args = ["simulate", "--version", "1", "--theta", "0.5", "--steps", "1000000", "--seed", "7"]
    assert run(capsys, *args, "--output", "a")[0] == 0
    assert run(capsys, *args, "--output", "b")[0] == 0
    for part in ("_histogram.csv", "_summary.csv"):
        assert (tmp_path / f"a{part}").read_bytes() == (tmp_path / f"b{part}").read_bytes()
    header, rows = _rows((tmp_path / "a_summary.csv").read_text())
    assert header == ",".join(io.SUMMARY_COLUMNS)
    assert rows[-1].split(",")[3] == "1000000"
    header, _ = _rows((tmp_path / "a_histogram.csv").read_text())
    assert header == ",".join(io.HISTOGRAM_COLUMNS)


def test_simulate_version3(tmp_path, capsys):
    out = tmp_path / "v3"
    assert run(capsys, "simulate", "--version", "3", "--theta", "0.5", "--tmax", "20", "--seed", "7",
               "--output", str(out))[0] == 0
    _, rows = _rows((tmp_path / "v3_summary.csv").read_text())
    assert rows[-1].split(",")[3] == "20.0"


def test_simulate_json(tmp_path, capsys):
    out = tmp_path / "run"
    run(capsys, "simulate", "--theta", "0.5", "--steps", "100", "--format", "json", "--output", str(out),
        "--checkpoints", "10,100")
    doc = json.loads((tmp_path / "run.json").read_text())
    assert [s["step_or_time"] for s in doc["snapshots"]] == [10, 100]


def test_oracle_enumerate(capsys):
    code, out, _ = run(capsys, "oracle", "--enumerate", "4", "--version", "1", "--theta", "0.3")
    doc = json.loads(out)
    assert code == 0
    assert sum(s["p"] for s in doc["states"]) == pytest.approx(1.0, abs=1e-14)


def test_oracle_first_passage(capsys):
    code, out, _ = run(capsys, "oracle", "--first-passage", "10", "--theta", "0.5")
    doc = json.loads(out)
    assert doc["values"][0] == pytest.approx(doc["p0_from_a"], rel=1e-12)


def test_oracle_stationary_and_mc(capsys):
    _, out, _ = run(capsys, "oracle", "--stationary", "20", "--theta", "0.5")
    assert len(json.loads(out)["values"]) == 21
    _, out, _ = run(capsys, "oracle", "--mc-first-passage", "2", "--theta", "0.5", "--replicas", "500")
    assert json.loads(out)["replicas"] == 500


def test_experiment_exit_codes(tmp_path, capsys):
    spec = tmp_path / "e.json"
    spec.write_text(json.dumps({"kind": "growth_law", "theta": 0.4, "horizon": 20000, "replicas": 2}))
    code, out, _ = run(capsys, "experiment", "--spec", str(spec), "--format", "json")
    assert code == 0 and json.loads(out)["passed"]
    # a tolerance nobody can meet
    spec.write_text(json.dumps({"kind": "growth_law", "theta": 0.4, "horizon": 20000, "replicas": 2,
                                "tolerances": {"ratio": 1e-12}}))
    out_path = tmp_path / "res.csv"
    code, _, err = run(capsys, "experiment", "--spec", str(spec), "--output", str(out_path))
    assert code == 3
    assert "FAIL" in err
    assert out_path.read_text().startswith(io.SCHEMA_LINE)
    assert (tmp_path / "res.csv.verdicts.csv").exists()


def test_selfcheck_fast(monkeypatch, capsys):
    from dupdel import selfcheck

    calls = []

    def fake(fast, echo):
        calls.append(fast)
        r = selfcheck.CriterionResult(1, "x", 10.0)
        r.check("fine", True)
        return [r]

    monkeypatch.setattr(selfcheck, "run_selfcheck", fake)
    code, out, _ = run(capsys, "selfcheck", "--fast")
    assert code == 0 and calls == [True]
    assert out.startswith("[PASS] criterion 1")
