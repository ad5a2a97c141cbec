import json
import subprocess
import sys

import pytest

from dalyap.cli import main
from dalyap.io import read_grid_csv


@pytest.fixture(autouse=True)
def in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def write_map(path, dim, components):
    path.write_text(json.dumps({"dim": dim, "components": components}))
    return str(path)


def test_check_examples(capsys):
    for name in ("ex1", "ex2"):
        assert main(["check", "--map", name]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["hypotheses_ok"] is True and doc["r"] == 0.0
        assert abs(doc["jacobian_norm"] - 1.0) <= 1e-12


def test_check_unstable(in_tmp, capsys):
    path = write_map(in_tmp / "double.json", 1, [[{"exp": [1], "coef": 2.0}]])
    assert main(["check", "--map", path]) == 1
    captured = capsys.readouterr()
    assert json.loads(captured.out)["hypotheses_ok"] is False
    assert "spectral radius 2 ≥ 1" in captured.err


def test_bad_inputs(in_tmp, capsys):
    assert main(["check", "--map", "missing.json"]) == 2
    (in_tmp / "broken.json").write_text("{not json")
    assert main(["check", "--map", "broken.json"]) == 2
    assert main(["estimate", "--map", "ex1", "--window=-1:1"]) == 2
    assert main(["check", "--map", "ex1", "--x0", "0,0.5"]) == 1


def test_lyapunov_outputs(in_tmp):
    assert main(["lyapunov", "--map", "ex1", "--degree", "2", "--orbit-at", "0,0.5;0,1.5"]) == 0
    doc = json.loads((in_tmp / "ex1.V.json").read_text())
    terms = {tuple(t["exp"]): t["coef"] for t in doc["terms"]}
    assert terms == {(2, 0): 1.0, (0, 2): 2.0}
    rows = (in_tmp / "ex1.orbit.csv").read_text().splitlines()
    assert len(rows) == 2  # header plus the captured point; (0, 1.5) diverges


def test_lyapunov_zero_and_scalar(in_tmp):
    assert main(["lyapunov", "--map", "zero", "--degree", "4"]) == 0
    doc = json.loads((in_tmp / "zero.V.json").read_text())
    assert {tuple(t["exp"]): t["coef"] for t in doc["terms"]} == {(2, 0): 1.0, (0, 2): 1.0}
    path = write_map(in_tmp / "s.json", 1, [[{"exp": [1], "coef": 0.5}, {"exp": [2], "coef": 1.0}]])
    assert main(["lyapunov", "--map", path, "--degree", "3"]) == 0
    terms = {tuple(t["exp"]): t["coef"] for t in json.loads((in_tmp / "s.V.json").read_text())["terms"]}
    assert terms[(2,)] == pytest.approx(4 / 3) and terms[(3,)] == pytest.approx(1.5238095238)


def test_estimate_example_one(in_tmp):
    assert main(["estimate", "--map", "ex1", "--window=-5:5,-1.5:1.5", "--svg"]) == 0
    doc = json.loads((in_tmp / "ex1.region.json").read_text())
    assert doc["soundness"] == 1.0 and doc["window_limited"] is False
    rows = read_grid_csv(in_tmp / "ex1.grid.csv")
    assert len(rows) == 200 * 200 and set(rows[0]) == {"x0", "x1", "class", "V", "W"}
    assert (in_tmp / "ex1.region.svg").read_text().lstrip().startswith("<?xml")


def test_estimate_example_two(in_tmp):
    assert main(["estimate", "--map", "ex2", "--window=-0.5:0.5,-0.5:0.5", "--res", "100"]) == 0
    doc = json.loads((in_tmp / "ex2.region.json").read_text())
    assert doc["soundness"] == 1.0 and doc["coverage"] > 0


def test_estimate_zero_map(in_tmp, capsys):
    assert main(["estimate", "--map", "zero", "--res", "40"]) == 0
    doc = json.loads((in_tmp / "zero.region.json").read_text())
    assert doc["window_limited"] is True and doc["soundness"] == 1.0
    assert "window-limited" in capsys.readouterr().err


def test_estimate_shifted_fixed_point(in_tmp):
    # g(x, y) = (x y + 1, y^3) has the fixed point (1, 0); with u = x - 1 it reads
    # u' = u y + y, v' = v^3, i.e. Example 1 moved by one unit along x
    comps = [[{"exp": [1, 1], "coef": 1.0}, {"exp": [0, 0], "coef": 1.0}], [{"exp": [0, 3], "coef": 1.0}]]
    path = write_map(in_tmp / "shifted.json", 2, comps)
    args = ["estimate", "--map", path, "--x0", "1,0", "--window=-4:6,-1.5:1.5", "--res", "60"]
    assert main(args) == 0
    doc = json.loads((in_tmp / "shifted.region.json").read_text())
    assert doc["window"] == [[-4.0, 6.0], [-1.5, 1.5]] and doc["soundness"] == 1.0


def test_estimate_thread_determinism(in_tmp):
    base = ["estimate", "--map", "ex1", "--window=-5:5,-1.5:1.5", "--res", "120"]
    assert main(base + ["--threads", "1", "--out-prefix", "a", "--svg"]) == 0
    assert main(base + ["--threads", "8", "--out-prefix", "b", "--svg"]) == 0
    for ext in ("grid.csv", "region.json", "region.svg"):
        assert (in_tmp / f"a.{ext}").read_bytes() == (in_tmp / f"b.{ext}").read_bytes()


def test_verify_examples(in_tmp):
    assert main(["verify", "--map", "ex1", "--seed", "42"]) == 0
    report = json.loads((in_tmp / "ex1.verify.json").read_text())
    assert report["passed"] and set(report["suites"]) == {
        "cross_construction", "decrement_residual", "partial_sum_identity", "tail_bound", "capture_certificate"}
    assert main(["verify", "--map", "zero"]) == 0


def test_verify_corrupted_series(in_tmp, capsys):
    assert main(["lyapunov", "--map", "ex1"]) == 0
    doc = json.loads((in_tmp / "ex1.V.json").read_text())
    doc["terms"][0]["coef"] += 1e-2
    (in_tmp / "bad.V.json").write_text(json.dumps(doc))
    assert main(["verify", "--map", "ex1", "--lyapunov", "bad.V.json"]) == 1
    assert "decrement_residual" in capsys.readouterr().err


def test_entry_point_runs(in_tmp):
    out = subprocess.run([sys.executable, "-m", "dalyap.cli", "check", "--map", "ex2"],
                         capture_output=True, text=True, check=True)
    assert json.loads(out.stdout)["hypotheses_ok"] is True
