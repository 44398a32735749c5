import json
import subprocess
import sys

import pytest

from bayespred.cli import main
from bayespred.errors import ConfigurationError
from bayespred.io import read_observations


def run(tmp_path, name, *argv):
    out = tmp_path / name
    code = main([*argv, "--out-dir", str(out)])
    return code, out


def outputs(out):
    return {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.name != "timing.json"}


def test_simulate_writes_chain_and_snapshots(tmp_path):
    code, out = run(tmp_path, "a", "simulate", "--rule", "polya", "--base", "uniform3", "--steps", "20",
                    "--grid", "0.5,1.5", "--seed", "4")
    assert code == 0
    assert len((out / "chain.csv").read_text().splitlines()) == 21
    assert len((out / "snapshots.csv").read_text().splitlines()) == 22
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["prior_on_grid"] == pytest.approx([1 / 3, 2 / 3])


def test_config_echo_reproduces_outputs(tmp_path):
    code, a = run(tmp_path, "a", "simulate", "--rule", "newton", "--kernel", "normal", "--theta-grid=-1,1",
                  "--steps", "30", "--grid=-1,0,1", "--seed", "8")
    assert code == 0
    code, b = run(tmp_path, "b", "simulate", "--config", str(a / "config.ini"))
    assert code == 0
    assert outputs(a) == outputs(b)


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[simulate]\nsteps = 7\nseed = 3\n")
    code, out = run(tmp_path, "a", "simulate", "--config", str(cfg), "--steps", "5")
    assert code == 0
    assert len((out / "chain.csv").read_text().splitlines()) == 6
    assert "seed = 3" in (out / "config.ini").read_text()


def test_unknown_config_key_is_a_config_error(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[simulate]\nstepz = 7\n")
    code, _ = run(tmp_path, "a", "simulate", "--config", str(cfg))
    assert code == 2
    assert "stepz" in capsys.readouterr().err


def test_resample_is_worker_independent(tmp_path):
    args = ["resample", "--mode", "prior", "--rule", "polya", "--base", "uniform3", "--grid", "0.5,1.5",
            "--future", "400", "--replicates", "600", "--seed", "21"]
    code1, one = run(tmp_path, "one", *args, "--workers", "1")
    code8, eight = run(tmp_path, "eight", *args, "--workers", "8")
    assert code1 == code8 == 0
    assert outputs(one) == outputs(eight)
    assert json.loads((eight / "timing.json").read_text())["workers"] == 8


def test_workers_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("BAYESPRED_WORKERS", "3")
    code, out = run(tmp_path, "a", "graphon", "--n", "5")
    assert code == 0 and json.loads((out / "timing.json").read_text())["workers"] == 3
    monkeypatch.setenv("BAYESPRED_WORKERS", "lots")
    assert run(tmp_path, "b", "graphon", "--n", "5")[0] == 2


def test_resample_posterior_reports_beta_oracle(tmp_path):
    data = tmp_path / "d.csv"
    data.write_text("x\n1\n1\n0\n1\n")
    code, out = run(tmp_path, "a", "resample", "--data", str(data), "--replicates", "300", "--future", "1000",
                    "--histogram-bins", "10")
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["beta_oracle"]["a"] == 3.5 and report["beta_oracle"]["b"] == 1.5
    assert report["beta_oracle"]["pvalue"] > 0.001
    assert len((out / "histogram.csv").read_text().splitlines()) == 11
    assert (out / "sample.json").exists()


def test_posterior_mode_needs_data(tmp_path):
    assert run(tmp_path, "a", "resample")[0] == 2


def test_missing_data_file(tmp_path, capsys):
    code, _ = run(tmp_path, "a", "resample", "--data", str(tmp_path / "nope.csv"))
    assert code == 2 and "does not exist" in capsys.readouterr().err


def test_malformed_csv_names_line(tmp_path, capsys):
    data = tmp_path / "d.csv"
    data.write_text("x\n1\nbanana\n")
    code, _ = run(tmp_path, "a", "resample", "--data", str(data))
    assert code == 2 and "d.csv:3" in capsys.readouterr().err


def test_out_of_support_data_is_a_computation_error(tmp_path):
    data = tmp_path / "d.csv"
    data.write_text("x\n0\n")
    code, _ = run(tmp_path, "a", "newton", "--theta-grid", "1.0", "--data", str(data))
    assert code == 3


def test_bad_parameter_values(tmp_path):
    assert run(tmp_path, "a", "simulate", "--steps", "many")[0] == 2
    assert run(tmp_path, "b", "simulate", "--rule", "dirichlet-ish")[0] == 2
    assert run(tmp_path, "c", "simulate", "--seed", "-4")[0] == 2


def test_credible_polya_and_ogd(tmp_path):
    code, out = run(tmp_path, "a", "credible", "--rule", "polya", "--base", "uniform3", "--grid", "0.5,1.5",
                    "--steps", "500", "--seed", "2")
    assert code == 0
    lines = (out / "credible.csv").read_text().splitlines()
    assert lines[0] == "t,center,lo,hi,V" and len(lines) == 3
    code, out = run(tmp_path, "b", "credible", "--rule", "ogd", "--steps", "500", "--covariates", "box2")
    assert code == 0 and json.loads((out / "gaussian.json").read_text())["n"] == 500


def test_credible_rejects_atom_on_grid(tmp_path):
    assert run(tmp_path, "a", "credible", "--grid", "1.0")[0] == 2


def test_newton_trajectory(tmp_path):
    code, out = run(tmp_path, "a", "newton", "--steps", "12", "--seed", "1")
    assert code == 0
    rows = (out / "trajectory.csv").read_text().splitlines()
    assert rows[0].startswith("n,x,G(theta=0.2)") and len(rows) == 14
    assert json.loads((out / "checkpoint.json").read_text())["n"] == 12


def test_ogd_checkpoint_resume_matches_full_run(tmp_path):
    data = tmp_path / "xy.csv"
    rows = ["x1,x2,y"] + [f"1,{(i * 7) % 5 - 2},{(i * 3) % 2}" for i in range(40)]
    data.write_text("\n".join(rows) + "\n")
    first = tmp_path / "first.csv"
    first.write_text("\n".join(rows[:21]) + "\n")
    second = tmp_path / "second.csv"
    second.write_text("\n".join([rows[0]] + rows[21:]) + "\n")
    assert run(tmp_path, "full", "ogd", "--data", str(data))[0] == 0
    assert run(tmp_path, "half", "ogd", "--data", str(first))[0] == 0
    code, rest = run(tmp_path, "rest", "ogd", "--data", str(second), "--checkpoint",
                     str(tmp_path / "half" / "checkpoint.json"))
    assert code == 0
    assert (rest / "checkpoint.json").read_bytes() == (tmp_path / "full" / "checkpoint.json").read_bytes()


def test_ogd_bad_checkpoint(tmp_path):
    bad = tmp_path / "ck.json"
    bad.write_text("{not json")
    assert run(tmp_path, "a", "ogd", "--checkpoint", str(bad))[0] == 2


def test_ogd_coverage_experiment(tmp_path):
    code, out = run(tmp_path, "a", "ogd", "--experiment", "coverage", "--n", "200", "--horizon", "800",
                    "--replicates", "40", "--seed", "1")
    assert code == 0
    report = json.loads((out / "coverage.json").read_text())
    assert len(report["coverage"]) == 2 and 0 <= report["vn_over_plugin_in_band"] <= 1


def test_diagnose_prints_table(tmp_path, capsys):
    code, out = run(tmp_path, "a", "diagnose", "--rule", "newton", "--check", "exchangeable", "--n-max", "3")
    assert code == 0
    text = capsys.readouterr().out
    assert "exchangeable" in text and "fail" in text
    report = json.loads((out / "report.json").read_text())
    assert report[0]["verdict"] == "fail" and report[0]["witness"]


def test_diagnose_all_checks(tmp_path):
    code, out = run(tmp_path, "a", "diagnose", "--n-max", "3", "--depth", "3")
    assert code == 0
    verdicts = {r["name"]: r["verdict"] for r in json.loads((out / "report.json").read_text())}
    assert set(verdicts.values()) == {"pass"} and len(verdicts) == 6


def test_graphon_summary(tmp_path):
    code, out = run(tmp_path, "a", "graphon", "--graphon", "constant", "--p", "0.4", "--n", "40",
                    "--replicates", "5", "--mode", "joint")
    assert code == 0
    s = json.loads((out / "summary.json").read_text())
    assert abs(s["mean_frequency"] - 0.4) < 0.05
    assert len((out / "edge_frequency.csv").read_text().splitlines()) == 6


def test_entry_point_runs(tmp_path):
    res = subprocess.run([sys.executable, "-m", "bayespred.cli", "graphon", "--n", "4", "--out-dir",
                          str(tmp_path / "o")], capture_output=True, text=True)
    assert res.returncode == 0 and (tmp_path / "o" / "array.csv").exists()


def test_read_observations_formats(tmp_path):
    j = tmp_path / "d.jsonl"
    j.write_text('{"x": [1, 0.5], "y": 1}\n\n{"x": [0, 2], "y": 0}\n')
    xs, ys = read_observations(j, "vector", with_y=True)
    assert xs == [(1.0, 0.5), (0.0, 2.0)] and ys == [1, 0]
    c = tmp_path / "d.csv"
    c.write_text("x\n2\n3.0\n")
    assert read_observations(c, "categorical")[0] == [2, 3]
    c.write_text("x\n2.5\n")
    with pytest.raises(ConfigurationError, match="integers"):
        read_observations(c, "categorical")
    j.write_text('{"x": 1}\n{"z": 2}\n')
    with pytest.raises(ConfigurationError, match="d.jsonl:2"):
        read_observations(j, "real")
    c.write_text("x1,y\n1,2\n")
    with pytest.raises(ConfigurationError, match="0 or 1"):
        read_observations(c, "vector", with_y=True)
