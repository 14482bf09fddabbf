import json

import pytest

from simplechar.cli import main
from simplechar.fields import read_fields


def write_config(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


def test_bad_config_key_exits_2(tmp_path):
    cfg = write_config(tmp_path / "c.json", {"scenario": {"preset": "helmholtz"}, "bogus": 1})
    assert run(tmp_path, "solve", "--config", cfg) == 2


def test_bad_resolution_exits_2(tmp_path):
    assert run(tmp_path, "solve", "--preset", "helmholtz", "--resolution", "100") == 2


def test_laplacian_exits_3(tmp_path):
    assert run(tmp_path, "solve", "--preset", "laplacian", "--resolution", "64") == 3


def test_solve_writes_outputs(tmp_path):
    assert run(tmp_path, "solve", "--preset", "helmholtz", "--resolution", "128", "--emit-pieces") == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["residual_fd"] < 1e-3
    assert rep["pieces_file"] == "pieces.scfd"
    assert len(read_fields(tmp_path / "u.scfd")) == 1
    assert len(read_fields(tmp_path / "pieces.scfd")) >= 2
    assert (tmp_path / "timings.json").exists()


def test_solve_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["solve", "--preset", "bilaplacian", "--resolution", "64", "--out", str(d)]) == 0
    for name in ("report.json", "u.scfd", "f.scfd"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_dirac_writes_four_records(tmp_path):
    assert run(tmp_path, "solve", "--preset", "dirac", "--resolution", "32") == 0
    assert len(read_fields(tmp_path / "u.scfd")) == 4


def test_zero_source_ratio_not_applicable(tmp_path):
    cfg = write_config(tmp_path / "c.json", {"scenario": {
        "preset": "helmholtz", "resolution": 64,
        "source": {"centers": [[0.0, 0.0]], "widths": [1.0], "amplitudes": [0.0]}}})
    assert run(tmp_path, "solve", "--config", cfg) == 0
    assert json.loads((tmp_path / "report.json").read_text())["ratio"] == "not applicable"


def test_counterexample_study_and_report(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", {"study": {"kind": "counterexample"}})
    assert run(tmp_path, "study", "--config", cfg) == 0
    summary = json.loads((tmp_path / "counterexample_summary.json").read_text())
    assert summary["slope"] == pytest.approx(1.0, abs=1e-3)
    assert (tmp_path / "counterexample.csv").read_text().count("\n") == 5
    assert run(tmp_path, "report") == 0
    assert "counterexample_summary.json" in capsys.readouterr().out
    assert "counterexample_summary.json" in json.loads((tmp_path / "summary.json").read_text())["reports"]


def test_failed_study_exits_5(tmp_path):
    cfg = write_config(tmp_path / "c.json", {
        "scenario": {"preset": "helmholtz", "resolution": 64, "box": 64.0},
        "study": {"kind": "scaling", "values": [1.0, 2.0], "tol": -1.0}})
    assert run(tmp_path, "study", "--config", cfg) == 5


def test_analyze_helmholtz(tmp_path):
    assert run(tmp_path, "analyze", "--preset", "helmholtz") == 0
    rep = json.loads((tmp_path / "analysis.json").read_text())
    assert "normal_form" in json.dumps(rep)
