import subprocess
import sys

import pytest

from mpevt.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, EXIT_RUNTIME, main

CFG = """
[defaults]
seed = 3

[ulam]
kind = ulam-bound
alpha = 0.5
n = 100, 10^2.5, 1000
n_cells = 4096
grading = 1.01

[strict]
kind = ulam-bound
alpha = 0.5
n = 100, 1000
n_cells = 4096
grading = 1.01
mesh_tol = 1e-9

[poisson]
kind = dichotomy-poisson
alpha = 0.5
zeta = 0.7
n = 500
replicas = 200

[adj]
kind = zero-adjusted
alpha = 0.2
tau = 1
n = 100, 1000
replicas = 200
"""


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text(CFG)
    return p


def test_pass_exit_code(cfg, tmp_path, capsys):
    rc = main(["ulam", "--config", str(cfg), "--experiment", "ulam", "--out", str(tmp_path / "o")])
    assert rc == EXIT_OK
    assert "PASS ulam" in capsys.readouterr().out
    assert (tmp_path / "o" / "ulam" / "ulam_cells.csv").exists()
    assert (tmp_path / "o" / "report" / "summary.csv").exists()


def test_fail_exit_code(cfg, tmp_path):
    assert main(["simulate", "--config", str(cfg), "--experiment", "strict", "--out", str(tmp_path)]) == EXIT_FAIL


def test_config_exit_codes(tmp_path, cfg, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[z]\nkind = zero-adjusted\nalpha = 0.3\nn = 100\nreplicas = 200\n")
    assert main(["zero-point", "--config", str(bad)]) == EXIT_CONFIG
    assert "sqrt(5) - 2" in capsys.readouterr().err
    assert main(["simulate"]) == EXIT_CONFIG
    assert main(["simulate", "--config", str(cfg), "--experiment", "missing"]) == EXIT_CONFIG
    assert main(["frobnicate"]) == EXIT_CONFIG
    assert main(["simulate", "--format", "xml", "--config", str(cfg)]) == EXIT_CONFIG


def test_runtime_exit_code(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.ini")]) == EXIT_RUNTIME


def test_env_overrides(cfg, tmp_path, monkeypatch):
    out = tmp_path / "envout"
    monkeypatch.setenv("MPEVT_CONFIG", str(cfg))
    monkeypatch.setenv("MPEVT_OUT", str(out))
    monkeypatch.setenv("MPEVT_FORMAT", "json-lines")
    monkeypatch.setenv("MPEVT_SEED", "99")
    assert main(["thresholds", "--experiment", "adj"]) == EXIT_OK
    assert (out / "adj" / "thresholds_tau1.jsonl").exists()
    # flags win over the environment
    assert main(["thresholds", "--experiment", "adj", "--format", "csv"]) == EXIT_OK
    assert (out / "adj" / "thresholds_tau1.csv").exists()


def test_seed_override_changes_digest(cfg, tmp_path, capsys):
    main(["ulam", "--config", str(cfg), "--experiment", "ulam", "--out", str(tmp_path / "a")])
    main(["ulam", "--config", str(cfg), "--experiment", "ulam", "--out", str(tmp_path / "b"), "--seed", "4"])
    lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith("PASS")]
    assert len(lines) == 2 and lines[0].split("digest=")[1][:16] != lines[1].split("digest=")[1][:16]


def test_ei_and_repp(cfg, tmp_path, capsys):
    assert main(["ei", "--config", str(cfg), "--experiment", "poisson", "--out", str(tmp_path)]) == EXIT_OK
    assert "obrien=" in capsys.readouterr().out
    assert (tmp_path / "poisson" / "ei.csv").exists()
    assert main(["repp", "--config", str(cfg), "--experiment", "poisson", "--out", str(tmp_path)]) == EXIT_OK
    head = (tmp_path / "poisson" / "repp.csv").read_text().splitlines()[0]
    assert head == "replica_id,n,v_n,event_index,rescaled_time"


def test_report_subcommand(cfg, tmp_path):
    assert main(["report", "--out", str(tmp_path)]) == EXIT_OK  # nothing recorded yet
    main(["simulate", "--config", str(cfg), "--experiment", "strict", "--out", str(tmp_path)])
    assert main(["report", "--out", str(tmp_path)]) == EXIT_FAIL


def test_module_entry_point(cfg, tmp_path):
    r = subprocess.run([sys.executable, "-m", "mpevt", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "simulate" in r.stdout
