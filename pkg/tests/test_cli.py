import json
import os
import subprocess
import sys

import pytest

from momenta import cli


def run(args, tmp_path):
    path = tmp_path / "report.json"
    code = cli.main(["--report", str(path), *args])
    return code, (json.loads(path.read_text()) if path.exists() else None)


def test_gauge_flat(tmp_path):
    code, rep = run(["--seed", "7", "gauge", "flat", "--genus", "1"], tmp_path)
    assert code == 0 and rep["pass"]
    assert rep["data"]["harmonic_dim"] == 2
    checks = {c["name"]: c for c in rep["checks"]}
    assert checks["momentum_identity"]["pass"]
    for c in rep["checks"]:
        assert set(c) == {"name", "anchor", "max_residual", "tolerance", "pass"}


def test_reduce_linear(tmp_path):
    code, rep = run(["reduce", "linear", "--weights", "1 -1"], tmp_path)
    assert code == 0 and rep["data"]["reduced_dims"] == [0, 2]
    assert rep["schema"] == 1 and rep["data"]["reduction"]["schema"] == 1


def test_reduce_bad_input(tmp_path, capsys):
    assert run(["reduce", "linear", "--weights", "1 x"], tmp_path)[0] == 1
    assert run(["reduce", "linear", "--weights", "1 -1", "--mu", "1 2"], tmp_path)[0] == 1


def test_usage_errors(capsys):
    assert cli.main(["bogus"]) == 1
    assert "usage" in capsys.readouterr().err
    assert cli.main(["gauge", "flat"]) == 1
    assert cli.main(["symplin", "verify", "--nope"]) == 1
    assert cli.main(["gauge", "flat", "--genus", "0"]) == 1


def test_tol_scale_and_failure_exit(tmp_path):
    code, rep = run(["--tol-scale", "0", "gauge", "ym", "--genus", "1", "--chern", "1"], tmp_path)
    assert code == 2 and not rep["pass"]
    assert all(c["tolerance"] == 0 for c in rep["checks"])


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("MOMENTA_SEED", "5")
    _, rep = run(["repvar", "solve", "--genus", "2", "--samples", "3"], tmp_path)
    assert rep["seed"] == 5


def test_normalform_demo(tmp_path):
    code, rep = run(["normalform", "demo", "--model", "fold"], tmp_path)
    assert code == 0 and rep["data"]["normal_forms"]["fold"]["splitting"]["coker"] == 1


def test_symplin_verify(tmp_path):
    assert run(["symplin", "verify"], tmp_path)[0] == 0


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "momenta", "--seed", "1", "gauge", "ym", "--genus", "1",
                          "--chern", "-2"], capture_output=True, text=True,
                         env={**os.environ, "PYTHONWARNINGS": "ignore"})
    assert out.returncode == 0
    assert json.loads(out.stdout)["data"]["chern"] == -2
