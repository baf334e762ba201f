"""End-to-end runs of the command-line interface."""

import json

import pytest
from click.testing import CliRunner

from tideh.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


def simulate_corpus(runner, root, n=6, seed=42, p0="0.002",
                    origin="40000", horizon="8"):
    args = ["simulate", "--n", str(n), "--p0", p0, "--origin-followers",
            origin, "--followers", "150", "--horizon-hours", horizon,
            "--seed", str(seed), "--out", str(root)]
    res = runner.invoke(main, args, catch_exceptions=False)
    assert res.exit_code == 0, res.output
    return json.loads(res.output)


def test_simulate_writes_corpus(runner, tmp_path):
    blob = simulate_corpus(runner, tmp_path / "corp")
    assert blob["cascades"] == 6
    assert len(blob["events"]) == 6
    index = (tmp_path / "corp" / "index.txt").read_text().splitlines()
    assert len(index) == 6
    for cid in index:
        assert (tmp_path / "corp" / f"{cid}.txt").is_file()


def test_simulate_deterministic(runner, tmp_path):
    simulate_corpus(runner, tmp_path / "a", seed=9)
    simulate_corpus(runner, tmp_path / "b", seed=9)
    for name in (tmp_path / "a" / "index.txt").read_text().split():
        assert ((tmp_path / "a" / f"{name}.txt").read_bytes()
                == (tmp_path / "b" / f"{name}.txt").read_bytes())


def test_simulate_needs_follower_source(runner, tmp_path):
    res = runner.invoke(main, [
        "simulate", "--p0", "0.001", "--origin-followers", "1000",
        "--seed", "1", "--out", str(tmp_path / "x")])
    assert res.exit_code == 2
    err = json.loads(res.stderr)
    assert err["error"] == "ValueError"
    assert "--followers" in err["message"]


def test_fit_constant_and_full(runner, tmp_path):
    simulate_corpus(runner, tmp_path, n=1, seed=3)
    cascade = next(tmp_path.glob("sim-*.txt"))
    res = runner.invoke(main, [
        "fit", "--cascade", str(cascade), "--t-hours", "8",
        "--mode", "constant"], catch_exceptions=False)
    assert res.exit_code == 0
    blob = json.loads(res.output)
    assert blob["mode"] == "constant"
    assert 0 < blob["p0"] < 1

    res = runner.invoke(main, [
        "fit", "--cascade", str(cascade), "--t-hours", "8",
        "--delta-obs-hours", "1", "--mode", "full"], catch_exceptions=False)
    assert res.exit_code == 0
    blob = json.loads(res.output)
    assert set(blob) == {"mode", "p0", "r0", "phi0_days", "tau_m_days",
                         "residual", "converged", "iterations"}
    assert 0 <= blob["r0"] < 1


def test_fit_amplitude_requires_shape(runner, tmp_path):
    simulate_corpus(runner, tmp_path, n=1, seed=3)
    cascade = next(tmp_path.glob("sim-*.txt"))
    res = runner.invoke(main, [
        "fit", "--cascade", str(cascade), "--t-hours", "8",
        "--mode", "amplitude"])
    assert res.exit_code == 2
    assert json.loads(res.stderr)["error"] == "ValueError"
    res = runner.invoke(main, [
        "fit", "--cascade", str(cascade), "--t-hours", "8",
        "--mode", "amplitude", "--shape", "0.3,0.1,2.0"],
        catch_exceptions=False)
    assert json.loads(res.output)["tau_m_days"] == 2.0


def test_predict_with_explicit_params(runner, tmp_path):
    simulate_corpus(runner, tmp_path, n=1, seed=5)
    cascade = next(tmp_path.glob("sim-*.txt"))
    prefix = str(tmp_path / "run-")
    res = runner.invoke(main, [
        "predict", "--cascade", str(cascade), "--t-hours", "2",
        "--t-max-hours", "8", "--delta-pred-hours", "2",
        "--step-hours", "0.05", "--params", "0.002,0,0,2.0",
        "--out-prefix", prefix], catch_exceptions=False)
    assert res.exit_code == 0, res.output
    blob = json.loads(res.output)
    assert blob["final_pred"] >= blob["observed"] >= 0
    fc = (tmp_path / "run-forecast.csv").read_text().splitlines()
    assert fc[0] == "t_seconds,lambda_hat"
    act = (tmp_path / "run-activity.csv").read_text().splitlines()
    assert act[0] == "bin_start_seconds,bin_width_seconds,A_k"
    assert len(act) == 1 + 3    # (8h - 2h) / 2h


def test_predict_bad_params_errors(runner, tmp_path):
    simulate_corpus(runner, tmp_path, n=1, seed=5)
    cascade = next(tmp_path.glob("sim-*.txt"))
    res = runner.invoke(main, [
        "predict", "--cascade", str(cascade), "--t-hours", "2",
        "--params", "1,2,3", "--out-prefix", str(tmp_path / "x-")])
    assert res.exit_code == 2
    assert "p0,r0" in json.loads(res.stderr)["message"]


def test_evaluate_and_compare(runner, tmp_path):
    corp = tmp_path / "corp"
    simulate_corpus(runner, corp, n=8, seed=21)
    outs = []
    for method in ("hawkes_const", "rpp"):
        out = tmp_path / method
        res = runner.invoke(main, [
            "evaluate", "--method", method, "--corpus", str(corp),
            "--t-hours", "2", "--delta-pred-hours", "2",
            "--delta-obs-hours", "0.5", "--t-max-hours", "8",
            "--folds", "2", "--threshold", "0", "--seed", "13",
            "--out", str(out)], catch_exceptions=False)
        assert res.exit_code == 0, res.output
        blob = json.loads(res.output)
        assert blob["aggregates"]["n_records"] == 8
        assert (out / "records.csv").is_file()
        summary = json.loads((out / "summary.json").read_text())
        assert summary["schema"] == 1
        outs.append(out)

    res = runner.invoke(main, [
        "compare", str(outs[0]), str(outs[1]),
        "--out", str(tmp_path / "cmp.csv")], catch_exceptions=False)
    assert res.exit_code == 0
    rows = json.loads(res.output)
    assert {r["method"] for r in rows} == {"hawkes_const", "rpp"}
    assert (tmp_path / "cmp.csv").read_text().startswith("method,")


def test_evaluate_trained_needs_seed(runner, tmp_path):
    corp = tmp_path / "corp"
    simulate_corpus(runner, corp, n=4, seed=2)
    res = runner.invoke(main, [
        "evaluate", "--method", "lr", "--corpus", str(corp),
        "--t-hours", "2", "--delta-pred-hours", "2", "--threshold", "0",
        "--out", str(tmp_path / "r")])
    assert res.exit_code == 2
    err = json.loads(res.stderr)
    assert err["error"] == "ValueError"
    assert "seed" in err["message"]


def test_cli_reports_missing_files_as_json(runner, tmp_path):
    res = runner.invoke(main, [
        "compare", str(tmp_path)])
    assert res.exit_code == 2
    err = json.loads(res.stderr)
    assert err["error"] in ("FileNotFoundError", "OSError")
