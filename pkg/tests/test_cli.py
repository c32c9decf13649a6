from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from ivsysid.bounds import GammaParams, corollary_rate, gamma, ideal_window
from ivsysid.cli import main
from ivsysid.harness import ExperimentConfig, prepare_shared, run_trial


def run_cli(capsys, *argv):
    rc = main(list(argv))
    captured = capsys.readouterr()
    return rc, captured.out, captured.err


def parse_json(text):
    return json.loads(text)


def test_simulate_noiseless(tmp_path, capsys):
    rc, out, err = run_cli(
        capsys,
        "simulate",
        "--mode", "continuous",
        "--set", "n=50",
        "--set", "eta=0",
        "--set", "substeps=2",
        "--out", str(tmp_path),
    )
    assert rc == 0 and err == ""
    info = parse_json(out)
    assert info["rows"] == 50 and info["noisy"] is False
    with (tmp_path / "trajectory.csv").open(newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "x1", "x2", "x3"]
    assert len(rows) == 51
    assert float(rows[1][0]) == pytest.approx(1e-3)
    assert float(rows[50][0]) == pytest.approx(50e-3)


def test_simulate_noise_is_seeded(tmp_path, capsys):
    args = [
        "simulate", "--mode", "continuous",
        "--set", "n=30", "--set", "substeps=1",
    ]
    rc, _, _ = run_cli(capsys, *args, "--seed", "5", "--out", str(tmp_path / "a"))
    assert rc == 0
    rc, _, _ = run_cli(capsys, *args, "--seed", "5", "--out", str(tmp_path / "b"))
    assert rc == 0
    rc, _, _ = run_cli(capsys, *args, "--seed", "6", "--out", str(tmp_path / "c"))
    assert rc == 0
    a = (tmp_path / "a" / "trajectory.csv").read_bytes()
    assert a == (tmp_path / "b" / "trajectory.csv").read_bytes()
    assert a != (tmp_path / "c" / "trajectory.csv").read_bytes()
    header = a.decode().splitlines()[0].split(",")
    assert header == ["t", "x1", "x2", "x3", "z1", "z2", "z3"]


def test_filters_stencil_csv(tmp_path, capsys):
    rc, out, err = run_cli(
        capsys,
        "filters",
        "--N", "5", "--h", "0.1", "--location", "3",
        "--p", "5", "--derivative", "1",
        "--out", str(tmp_path),
    )
    assert rc == 0
    info = parse_json(out)
    assert info["window_size"] == 5
    with (tmp_path / "stencil.csv").open(newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["k", "weight_d0", "weight_d1"]
    d0 = np.array([float(r[1]) for r in rows[1:]])
    d1 = np.array([float(r[2]) for r in rows[1:]])
    assert d0 == pytest.approx([0, 0, 1, 0, 0], abs=1e-12)
    assert d1 == pytest.approx(np.array([1, -8, 0, 8, -1]) / 1.2, abs=1e-10)


def test_estimate_matches_library_pipeline(tmp_path, capsys):
    cfg = ExperimentConfig(
        mode="continuous", n=2000, N=20, p=4, eta=0.05, trials=1, substeps=2
    )
    common = [
        "--mode", "continuous",
        "--set", "n=2000", "--set", "N=20", "--set", "p=4",
        "--set", "eta=0.05", "--set", "substeps=2",
    ]
    rc, _, _ = run_cli(capsys, "simulate", *common, "--out", str(tmp_path))
    assert rc == 0

    rc, out, err = run_cli(
        capsys,
        "estimate", *common,
        "--input", str(tmp_path / "trajectory.csv"),
        "--out", str(tmp_path / "est"),
    )
    assert rc == 0, err
    result = parse_json(out)

    expected = run_trial(cfg, 0, prepare_shared(cfg))
    # the CSV round-trips floats exactly, so the numbers must match bitwise
    assert np.array_equal(np.array(result["iv"]["theta"]), expected.theta_iv)
    assert np.array_equal(np.array(result["ls"]["theta"]), expected.theta_ls)
    assert result["n_windows"] == expected.diagnostics["n_windows"]
    assert result["excitation"]["satisfied"] == expected.diagnostics["excitation_satisfied"]

    on_disk = json.loads((tmp_path / "est" / "estimate.json").read_text())
    assert on_disk["iv"]["theta"] == result["iv"]["theta"]


def test_estimate_rejects_nonuniform_grid(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("t,x1,x2,x3\n0.1,1,2,3\n0.2,1,2,3\n0.4,1,2,3\n")
    rc, out, err = run_cli(
        capsys, "estimate", "--mode", "continuous", "--input", str(path)
    )
    assert rc == 1
    assert "uniform" in parse_json(err)["error"]["message"]


def test_benchmark_manifest_and_overrides(tmp_path, capsys):
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps({
        "mode": "continuous", "n": 1200, "N": 16, "p": 3,
        "eta": 0.05, "trials": 6, "substeps": 2,
    }))
    rc, out, err = run_cli(
        capsys,
        "benchmark", "--config", str(manifest),
        "--trials", "4", "--out", str(tmp_path / "res"),
    )
    assert rc == 0, err
    summary = parse_json(out)
    assert summary["trials"] == {"requested": 4, "succeeded": 4, "failed": 0}
    assert summary["p_used"] == 3
    assert (tmp_path / "res" / "trials.csv").exists()
    assert (tmp_path / "res" / "summary.json").exists()
    assert not (tmp_path / "res" / "kde.csv").exists()  # below the density cutoff


def test_benchmark_reruns_byte_identical(tmp_path, capsys):
    args = [
        "benchmark", "--mode", "continuous", "--trials", "10", "--seed", "2",
        "--set", "n=1200", "--set", "N=16", "--set", "p=3",
        "--set", "eta=0.05", "--set", "substeps=2",
    ]
    rc, _, _ = run_cli(capsys, *args, "--out", str(tmp_path / "a"))
    assert rc == 0
    rc, _, _ = run_cli(capsys, *args, "--out", str(tmp_path / "b"))
    assert rc == 0
    for name in ("trials.csv", "summary.json", "kde.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_bounds_gamma_and_rate(capsys):
    rc, out, err = run_cli(
        capsys,
        "bounds",
        "--r", "2", "--a", "1", "--b", "10", "--K", "1",
        "--mc-trials", "20000", "--seed", "5",
        "--n", "100000", "--h", "0.001", "--p", "2", "--d", "1",
    )
    assert rc == 0, err
    result = parse_json(out)
    value = gamma(GammaParams(r=2, a=1, b=10, K=1))
    assert result["gamma"]["head"] == value.head
    assert result["gamma"]["total"] == value.total
    assert result["mc"]["ratio"] <= 1.0
    assert result["corollary_rate"] == corollary_rate(100000, 0.001, 2, 1)
    assert result["ideal_window"] == ideal_window(0.001, 2)


def test_bounds_partial_flags_error(capsys):
    rc, out, err = run_cli(capsys, "bounds", "--r", "2", "--a", "1")
    assert rc == 1
    assert parse_json(err)["error"]["type"] == "CliError"


def test_config_and_mode_conflict(tmp_path, capsys):
    manifest = tmp_path / "m.json"
    manifest.write_text(json.dumps({"mode": "discrete"}))
    rc, _, err = run_cli(
        capsys, "simulate", "--config", str(manifest), "--mode", "continuous",
        "--out", str(tmp_path),
    )
    assert rc == 1
    assert "not both" in parse_json(err)["error"]["message"]


def test_missing_mode_errors(tmp_path, capsys):
    rc, _, err = run_cli(capsys, "simulate", "--out", str(tmp_path))
    assert rc == 1
    assert parse_json(err)["error"]["type"] == "CliError"


def test_unknown_override_errors(tmp_path, capsys):
    rc, _, err = run_cli(
        capsys, "simulate", "--mode", "continuous",
        "--set", "q=1", "--out", str(tmp_path),
    )
    assert rc == 1
    assert "unknown config field" in parse_json(err)["error"]["message"]


def test_invalid_filter_spec_errors(tmp_path, capsys):
    rc, _, err = run_cli(
        capsys, "filters",
        "--N", "4", "--h", "0.1", "--location", "2", "--p", "9",
        "--out", str(tmp_path),
    )
    assert rc == 1
    assert parse_json(err)["error"]["type"] == "FilterRankError"


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    out = capsys.readouterr().out
    assert "simulate" in out and "benchmark" in out


def test_no_subcommand_errors(capsys):
    rc = main([])
    err = capsys.readouterr().err
    assert rc == 1
    assert parse_json(err)["error"]["type"] == "CliError"