import csv
import math
import json
import subprocess
import sys

import pytest

from p2pswarm.cli import main


def _json(path):
    return json.loads(path.read_text())


def test_sir_preset_reports_spiral(tmp_path, capsys):
    assert main(["run", "--preset", "sir-n1-open", "--out", str(tmp_path)]) == 0
    rep = _json(tmp_path / "equilibrium.json")
    assert rep["closed_form"]["spiral"] is True
    assert rep["x_star"] == pytest.approx([4 / 3, 1.25], abs=1e-10)
    assert (tmp_path / "vector_field.csv").exists() and (tmp_path / "fluid.csv").exists()


def test_case1_preset_table(tmp_path):
    assert main(["run", "--preset", "case1-settle", "--out", str(tmp_path)]) == 0
    with open(tmp_path / "settling_case1.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x0"] + [f"tau_beta_{b}" for b in range(1, 6)]
    for row in rows[1:]:
        taus = [float(v) for v in row[1:]]
        assert all(a > b for a, b in zip(taus, taus[1:]))


def test_missing_task_is_usage_error(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"model": {"n": 1, "beta": 1}}')
    assert main(["run", "--config", str(cfg)]) == 2
    assert "no task" in capsys.readouterr().err
    assert main([]) == 2


def test_config_syntax_error_reports_position(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{\n  "task": "integrate",\n  "model": {"n": 1,}\n}')
    assert main(["run", "--config", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert "line 3" in err and "column" in err


def test_config_field_errors(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"task": "integrate", "model": {"n": 1, "beta": 1}, "initial": [1, 2, 3]}))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "initial" in capsys.readouterr().err
    cfg.write_text(json.dumps({"task": "integrate", "colour": 1}))
    assert main(["run", "--config", str(cfg)]) == 2
    assert "colour" in capsys.readouterr().err


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"task": "integrate", "model": {"n": 1, "beta": 1.0},
                               "initial": [0.5, 0.5], "options": {"T": 1.0}}))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["integrate", "--config", str(cfg), "--beta", "3", "--x0", "0.9,0.1",
                 "--out", str(tmp_path / "b")]) == 0
    a = _json(tmp_path / "a" / "integrate.json")["final_state"]
    b = _json(tmp_path / "b" / "integrate.json")["final_state"]
    assert a[1] == pytest.approx(1 / (1 + math.exp(-1)))
    assert b[1] == pytest.approx(0.1 / (0.1 + 0.9 * math.exp(-3)))


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("P2PSWARM_OUT", str(tmp_path / "env"))
    assert main(["compare", "--lam", "1", "--beta", "1", "--delta", "1", "--beta-t", "2", "--gamma-t", "1"]) == 0
    assert (tmp_path / "env" / "compare.json").exists()


def test_compare_prints_verdict(tmp_path, capsys):
    assert main(["compare", "--lam", "0.1", "--beta", "1", "--delta", "1", "--beta-t", "2",
                 "--gamma-t", "1", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "verdict: splitting improves" in out
    rep = _json(tmp_path / "compare.json")
    assert rep["routes_agree"] is True and float(rep["lambda_threshold"]) > 0.1


def test_compare_missing_rate(tmp_path, capsys):
    assert main(["compare", "--lam", "1", "--out", str(tmp_path)]) == 2


def test_numeric_failure_exit_code(tmp_path, capsys):
    assert main(["settle", "--mode", "case1", "--epsilon", "1.5", "--out", str(tmp_path)]) == 1
    assert "settle failed" in capsys.readouterr().err


def test_simulate_deterministic_given_seed(tmp_path):
    args = ["simulate", "--n", "2", "--alpha", '{"{}": 5}', "--beta", "1", "--gamma", "1",
            "--delta", "1", "--x0", "3,1,1,2", "--T", "2", "--seed", "7"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert main(args[:-1] + ["8", "--out", str(tmp_path / "c")]) == 0
    a = (tmp_path / "a" / "trajectory.csv").read_text()
    assert a == (tmp_path / "b" / "trajectory.csv").read_text()
    assert a != (tmp_path / "c" / "trajectory.csv").read_text()


def test_simulate_agents_writes_records(tmp_path):
    assert main(["simulate", "--n", "1", "--alpha", '{"{}": 5}', "--beta", "1", "--delta", "1",
                 "--x0", "2,2", "--T", "3", "--method", "agents", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "peers.jsonl").read_text().splitlines()
    assert len(lines) >= 4


def test_presets_deterministic(tmp_path):
    for d in ("a", "b"):
        assert main(["run", "--preset", "sir-n1-open", "--out", str(tmp_path / d)]) == 0
    assert (tmp_path / "a" / "equilibrium.json").read_text() == (tmp_path / "b" / "equilibrium.json").read_text()


def test_closed_form_sir(tmp_path):
    assert main(["closed-form", "--kind", "sir", "--beta-rate", "1", "--delta-rate", "1",
                 "--x0-value", "1", "--y0", "0.1", "--out", str(tmp_path)]) == 0
    rep = _json(tmp_path / "closed_form.json")
    assert 0 < rep["final_size"] < 1


def test_diffusion_task(tmp_path):
    assert main(["diffusion", "--n", "1", "--beta", "1", "--x0", "0.5,0.5", "--T", "0.5",
                 "--paths", "50", "--points", "3", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "covariance_moment_ode.csv").exists()


def test_validate_subset(tmp_path, capsys):
    assert main(["validate", "--only", "1,3", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "[PASS]  1 " in out and "[PASS]  3 " in out and "2/2 checks passed" in out
    assert len(_json(tmp_path / "validate.json")) == 2


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "p2pswarm", "compare", "--lam", "1", "--beta", "1",
                          "--delta", "1", "--beta-t", "1", "--gamma-t", "1", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "verdict:" in res.stdout
