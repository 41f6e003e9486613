from __future__ import annotations
import json

import numpy as np
import pandas as pd
import pytest

from storagebid.common.table import ValueTable
from storagebid.data.ingest import parse_prices
from storagebid.experiments.run import build_parser, main


def _read(path):
    return json.loads(path.read_text())


def test_parser_defaults():
    args = build_parser().parse_args(["benchmark", "--config", "desk", "--iterations", "0,50"])
    assert args.iterations == [0, 50]
    assert args.seeds == 3 and not args.no_projection
    with pytest.raises(SystemExit):
        build_parser().parse_args(["benchmark", "--config", "desk", "--iterations", "a,b"])


def test_refine_writes_manifest(tmp_path):
    out = tmp_path / "refine"
    assert main(["refine", "--config", "desk", "--rounds", "2", "--out", str(out), "--no-timing"]) == 0
    manifest = _read(out / "manifest.json")
    assert manifest["command"] == "refine"
    assert manifest["outputs"] == ["refine.json", "table.npz"]
    assert manifest["wall_clock_sec"] == 0.0
    assert 1 <= _read(out / "refine.json")["rounds"] <= 2
    assert ValueTable.load(out / "table.npz").is_monotone(tol=1e-9)


def test_benchmark_is_byte_identical_across_runs(tmp_path):
    argv = ["benchmark", "--config", "desk", "--iterations", "0,20", "--seeds", "2",
            "--eval-paths", "50", "--no-timing", "--seed", "4"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(argv + ["--out", str(a)]) == 0
    assert main(argv + ["--out", str(b), "--threads", "2"]) == 0
    for name in ("benchmark.csv", "slices.csv", "cardinality.json", "bdp.npz"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name

    rows = pd.read_csv(a / "benchmark.csv")
    assert list(rows.columns) == ["algorithm", "N", "seed", "policy_value", "pct_optimal", "wall_time_sec"]
    assert len(rows) == 1 + 2 * 2 * 2
    bdp = rows[rows["algorithm"] == "BDP"].iloc[0]
    assert bdp["pct_optimal"] == 100.0
    assert (rows["wall_time_sec"] == 0.0).all()
    assert set(rows["algorithm"]) == {"BDP", "M-ADP", "AVI"}
    card = _read(a / "cardinality.json")
    assert card["pre_feasible_per_period"] == 5 * 4 * 21


def test_train_and_evaluate_on_history(tmp_path, root):
    config = str(root / "configs" / "case_study_small.json")
    train_a, train_b = tmp_path / "train_a", tmp_path / "train_b"
    argv = ["train", "--config", config, "--iterations", "30", "--seed", "1", "--no-timing"]
    assert main(argv + ["--out", str(train_a)]) == 0
    assert main(argv + ["--out", str(train_b)]) == 0
    assert (train_a / "table.npz").read_bytes() == (train_b / "table.npz").read_bytes()
    assert (train_a / "training.json").read_bytes() == (train_b / "training.json").read_bytes()
    training = _read(train_a / "training.json")
    assert training["iterations"] == 30 and training["seed"] == 1
    assert training["stepsize"] == "harmonic" and training["explore"] == "uniform"
    assert training["algorithm"] == "M-ADP" and training["wall_time_sec"] == 0.0
    assert "training.json" in _read(train_a / "manifest.json")["outputs"]
    dataset = _read(train_a / "dataset.json")
    assert dataset["training_month"] == "2012-01" and dataset["train_days"] == 12

    table = ValueTable.load(train_a / "table.npz")
    assert table.post and table.is_monotone()

    out = tmp_path / "eval"
    assert main(["evaluate", "--config", config, "--policy", "table", "--table", str(train_a / "table.npz"),
                 "--out", str(out), "--no-timing"]) == 0
    report = _read(out / "report.json")
    assert report["n_paths"] == 10
    assert np.isfinite(report["mean"])
    monthly = pd.read_csv(out / "monthly_revenues.csv")
    assert list(monthly["month"]) == ["2012-02"]


@pytest.mark.parametrize("policy", ["idle", "A", "B", "C"])
def test_baseline_policies_on_history(tmp_path, root, policy):
    config = str(root / "configs" / "case_study_small.json")
    out = tmp_path / policy
    assert main(["evaluate", "--config", config, "--policy", policy, "--out", str(out)]) == 0
    report = _read(out / "report.json")
    assert report["policy"]["policy"] == policy
    assert report["n_paths"] == 10


def test_bundled_data_resolves_outside_the_checkout(tmp_path, root, monkeypatch):
    monkeypatch.chdir(tmp_path)
    config = str(root / "configs" / "case_study_small.json")
    assert main(["evaluate", "--config", config, "--policy", "idle", "--out", "idle"]) == 0
    assert _read(tmp_path / "idle" / "dataset.json")["ingestion"]["days"] == 30


def test_idle_on_a_synthetic_instance(tmp_path):
    out = tmp_path / "idle"
    assert main(["evaluate", "--config", "desk", "--policy", "idle", "--n-paths", "25", "--out", str(out)]) == 0
    report = _read(out / "report.json")
    assert report["n_paths"] == 25 and report["mean"] == 0.0


def test_missing_table_exits_with_error(tmp_path, capsys):
    out = tmp_path / "err"
    assert main(["evaluate", "--config", "desk", "--policy", "table", "--out", str(out)]) == 2
    err = _read(out / "error.json")
    assert err["error"] == "ConfigurationError"
    assert "--table" in err["message"]
    assert "ConfigurationError" in capsys.readouterr().err
    assert not (out / "manifest.json").exists()


def test_unreadable_table_exits_with_error(tmp_path):
    out = tmp_path / "err"
    argv = ["evaluate", "--config", "desk", "--policy", "table", "--out", str(out)]
    assert main(argv + ["--table", str(tmp_path / "nope.npz")]) == 2
    err = _read(out / "error.json")
    assert err["error"] == "ConfigurationError"
    assert "nope.npz" in err["message"]
    assert not (out / "manifest.json").exists()

    garbage = tmp_path / "garbage.npz"
    garbage.write_text("not a table")
    assert main(argv + ["--table", str(garbage)]) == 2
    assert _read(out / "error.json")["error"] == "ConfigurationError"


def test_unexpected_failure_still_writes_error_json(tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise RuntimeError("disk on fire")

    monkeypatch.setattr("storagebid.experiments.run.run_refine", boom)
    out = tmp_path / "err"
    assert main(["refine", "--config", "desk", "--out", str(out)]) == 2
    err = _read(out / "error.json")
    assert err == {"command": "refine", "error": "RuntimeError", "message": "disk on fire"}


def test_convert_writes_price_csv(tmp_path):
    src = tmp_path / "export.csv"
    src.write_text(
        "Time Stamp,Name,PTID,LBMP ($/MWHr)\n"
        "02/01/2012 00:10:00,N.Y.C.,61761,33.0\n"
        "02/01/2012 00:05:00,N.Y.C.,61761,31.5\n"
        "02/01/2012 00:05:00,WEST,61752,20.0\n"
    )
    out = tmp_path / "nyc"
    assert main(["convert", str(src), "--zone", "N.Y.C.", "--interval-ending", "--out", str(out),
                 "--no-timing"]) == 0
    manifest = _read(out / "manifest.json")
    assert manifest["command"] == "convert" and manifest["config"] is None
    assert manifest["outputs"] == ["prices.csv"]
    records = parse_prices(out / "prices.csv")
    assert [r.price for r in records] == [31.5, 33.0]

    bad = tmp_path / "bad.csv"
    bad.write_text("Time Stamp,Name\n02/01/2012 00:05:00,WEST\n")
    err_out = tmp_path / "err"
    assert main(["convert", str(bad), "--out", str(err_out)]) == 2
    assert _read(err_out / "error.json")["error"] == "IngestionError"


def test_train_with_day_offset(tmp_path, root):
    config = str(root / "configs" / "case_study_small.json")
    out = tmp_path / "train"
    assert main(["train", "--config", config, "--iterations", "5", "--day-offset", "6", "--out", str(out),
                 "--no-timing"]) == 0
    assert _read(out / "dataset.json")["spec"]["day_offset"] == 6

    bad = tmp_path / "bad"
    assert main(["train", "--config", config, "--iterations", "5", "--day-offset", "24", "--out", str(bad)]) == 2
    assert _read(bad / "error.json")["error"] == "ConfigurationError"


def test_malformed_data_reports_lines(tmp_path, root):
    bad = tmp_path / "bad.csv"
    bad.write_text("timestamp,price\n2012-02-01 00:00:00,30\n2012-02-01 00:05:00,oops\n")
    out = tmp_path / "err"
    config = str(root / "configs" / "case_study_small.json")
    assert main(["train", "--config", config, "--data", str(bad), "--iterations", "1", "--out", str(out)]) == 2
    err = _read(out / "error.json")
    assert err["error"] == "IngestionError"
    assert err["lines"] == [3]


@pytest.mark.slow
def test_trained_policy_beats_rule_policies(tmp_path, root):
    config = str(root / "configs" / "case_study_small.json")
    train = tmp_path / "train"
    assert main(["train", "--config", config, "--iterations", "10000", "--out", str(train), "--no-timing"]) == 0
    means = {}
    for policy in ("table", "A", "B"):
        argv = ["evaluate", "--config", config, "--policy", policy, "--out", str(tmp_path / policy), "--no-timing"]
        if policy == "table":
            argv += ["--table", str(train / "table.npz")]
        assert main(argv) == 0
        means[policy] = _read(tmp_path / policy / "report.json")["mean"]
    assert means["table"] > means["A"], means
    assert means["table"] > means["B"], means
