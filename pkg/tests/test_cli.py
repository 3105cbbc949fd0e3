import json
import subprocess
import sys

import pytest

from artifact import __version__
from artifact.cli import main


def write_cfg(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_module_entry_point_version():
    out = subprocess.run([sys.executable, "-m", "artifact", "--version"], capture_output=True,
                         text=True, check=True)
    assert out.stdout.strip() == __version__


def test_minimize_tc(tmp_path):
    out = tmp_path / "tc"
    cfg = write_cfg(tmp_path, "problem.sigma = 1\nproblem.c = 1\n")
    assert main(["minimize", "tc", "--config", cfg, "--out", str(out)]) == 0
    m = manifest(out)
    assert m["validation"]["passed"]
    record = json.loads((out / "result.json").read_text())
    assert record["converged"]
    assert all(abs(record["residuals"][k]) <= 1e-5 for k in ("Nc", "Pc", "P1", "P2"))
    assert {"result.json", "result.field", "result.field.json", "ground_state.field",
            "history.csv"} <= set(m["outputs"])


def test_classify(tmp_path, capsys):
    out = tmp_path / "cls"
    cfg = write_cfg(tmp_path, "ineq.dim = 3\nineq.s = 2\nineq.p = 4\nineq.kappa = 1/2\n")
    assert main(["ineq", "classify", "--config", cfg, "--out", str(out)]) == 0
    region = json.loads((out / "region.json").read_text())
    assert region["3/2/4/0.5"]["verdict"] == "Bounded"


def test_unknown_key_exits_before_work(tmp_path, capsys):
    out = tmp_path / "bad"
    cfg = write_cfg(tmp_path, "problem.sigma = 1\nproblem.cee = 1\n")
    assert main(["minimize", "tc", "--config", cfg, "--out", str(out)]) == 2
    assert not out.exists()
    assert "unknown key" in capsys.readouterr().err


def test_supercritical_mass_problem_is_regime_error(tmp_path):
    out = tmp_path / "pm"
    cfg = write_cfg(tmp_path, "problem.sigma = 6\nproblem.m = 1\n")
    assert main(["minimize", "pm", "--config", cfg, "--out", str(out)]) == 3
    assert not out.exists()


def test_bad_jobs_and_seed(tmp_path):
    cfg = write_cfg(tmp_path, "ineq.dim = 1\nineq.s = 2\nineq.p = 6\nineq.kappa = 0.7\n")
    assert main(["ineq", "classify", "--config", cfg, "--jobs", "0", "--out", str(tmp_path / "a")]) == 2
    assert main(["ineq", "classify", "--config", cfg, "--seed", "-1", "--out", str(tmp_path / "b")]) == 2


@pytest.mark.slow
def test_validation_failure_and_waiver(tmp_path):
    # Below the threshold mass the sigma = 3 problem is degenerate, which fails validation.
    cfg = write_cfg(tmp_path, "problem.sigma = 3\nproblem.m = 1\n")
    out = tmp_path / "pm"
    assert main(["minimize", "pm", "--config", cfg, "--out", str(out)]) == 1
    failed = manifest(out)["validation"]["failed"]
    assert "nondegenerate" in failed
    args = ["minimize", "pm", "--config", cfg, "--out", str(tmp_path / "pmw"), "--waive", "typo"]
    for name in failed:
        args += ["--waive", name]
    assert main(args) == 0
    assert manifest(tmp_path / "pmw")["unknown_waivers"] == ["typo"]


@pytest.mark.slow
def test_scan_rerun_is_byte_identical(tmp_path, capsys):
    out = tmp_path / "scan"
    cfg = write_cfg(tmp_path, "problem.sigma = 1\nproblem.values = 1, 5\n")
    code = main(["scan", "tc", "--config", cfg, "--out", str(out), "--jobs", "1",
                 "--waive", "large_c_limits", "--waive", "small_c_sqrt"])
    assert code == 0
    assert main(["rerun", str(out / "manifest.json"), "--check", "--jobs", "2"]) == 0
    assert "digests match" in capsys.readouterr().out
    header = (out / "curve.csv").read_text().splitlines()[0]
    assert header == "param,value,multiplier,residual_max,flags"
