import json

import pandas as pd
import pytest

from core.experiment import ExperimentConfig
from reports.base_report import BaseReport
from reports.sweep_report import BenchReport, SweepReport, TrialReport
from reports.trace_report import FieldReport, TraceReport
from utils.config import Config


@pytest.fixture
def summary():
    return pd.DataFrame({
        "axis_value": [0.0, 0.0, 10.0, 10.0],
        "solver": ["nnlasso", "sic", "nnlasso", "sic"],
        "rmse_rad": [0.05, 0.1, 0.002, 0.04],
        "detection_failure_rate": [0.1, 0.0, 0.0, 0.0],
        "mean_solver_ms": [12.0, 0.5, 9.0, 0.4],
        "extra": [1, 2, 3, 4],
    })


def test_missing_columns_rejected():
    report = BaseReport(pd.DataFrame({"a": [1]}))
    report.required_columns = ("a", "b")
    with pytest.raises(ValueError, match="b"):
        report.validate()


def test_sweep_report_writes_csv_and_sidecar(tmp_path, summary):
    cfg = ExperimentConfig(master_seed=9, num_trials=20)
    path = tmp_path / "out" / "snr.csv"
    SweepReport(summary, "snr", cfg, {"command": "sweep"}).write(str(path))

    written = pd.read_csv(path)
    assert list(written.columns) == ["axis_value", "solver", "rmse_rad",
                                     "detection_failure_rate", "mean_solver_ms"]
    assert written["rmse_rad"].tolist() == summary["rmse_rad"].tolist()

    meta = json.loads((tmp_path / "out" / "snr.meta.json").read_text())
    assert meta["axis"] == "snr"
    assert meta["axis_values"] == [0.0, 10.0]
    assert meta["master_seed"] == 9
    assert meta["num_trials"] == 20
    assert meta["command"] == "sweep"
    assert meta["version"] == Config.version_string()
    assert meta["seed_derivation"].startswith("derive_seed(master_seed, 0, trial)")
    assert meta["rows"] == 4
    assert meta["config"]["experiment"]["master_seed"] == 9


def test_sidecar_can_be_skipped(tmp_path, summary):
    path = tmp_path / "plain.csv"
    SweepReport(summary, "snr", ExperimentConfig()).write(str(path), sidecar=False)
    assert path.exists()
    assert not (tmp_path / "plain.meta.json").exists()


def test_trial_and_bench_reports(tmp_path):
    cfg = ExperimentConfig()
    trials = pd.DataFrame({"axis_value": [1.0], "trial": [0], "solver": ["sic"], "user": [0],
                           "squared_error": [1e-4]})
    TrialReport(trials, cfg).write(str(tmp_path / "trials.csv"))
    bench = pd.DataFrame({"num_cells": [16], "solver": ["sic"], "median_ms": [0.3],
                          "per_iteration_us": [100.0]})
    TrialReport(trials, cfg.replace(common_random_numbers=False)).write(str(tmp_path / "own.csv"))
    own = json.loads((tmp_path / "own.meta.json").read_text())
    assert own["seed_derivation"] == "derive_seed(master_seed, axis_index, trial)"
    BenchReport(bench, cfg, 5).write(str(tmp_path / "bench.csv"))
    meta = json.loads((tmp_path / "bench.meta.json").read_text())
    assert meta["repetitions"] == 5
    with pytest.raises(ValueError):
        BenchReport(trials, cfg, 5).write(str(tmp_path / "wrong.csv"))


def test_trace_report_relative_decrease(tmp_path):
    trace = pd.DataFrame({"iteration": [0, 1, 2], "objective": [10.0, 2.0, 0.05],
                          "model_error": [20.0, 3.0, 0.1]})
    report = TraceReport(trace, "nnlasso", ExperimentConfig(), noiseless=True)
    assert report.relative_decrease() == pytest.approx({"objective": 0.005, "model_error": 0.005})
    report.write(str(tmp_path / "trace.csv"))
    meta = json.loads((tmp_path / "trace.meta.json").read_text())
    assert meta["scenario_deg"] == [-8.0, 3.0, 10.0]
    assert meta["noiseless"] is True
    with pytest.raises(ValueError):
        TraceReport(trace, "music", ExperimentConfig(), noiseless=True)


def test_field_report(tmp_path):
    table = pd.DataFrame({"depth_index": [0], "z_m": [0.0], "x_m": [0.0], "intensity": [1.0],
                          "normalized": [1.0]})
    FieldReport(table, 5.0, ExperimentConfig()).write(str(tmp_path / "field.csv"))
    meta = json.loads((tmp_path / "field.meta.json").read_text())
    assert meta["theta_deg"] == 5.0
    assert meta["lens"]["focal_wavelengths"] == 52.0
