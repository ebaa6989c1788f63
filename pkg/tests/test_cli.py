import json

import pandas as pd
import pytest

from cli.parser import build_parser, parse_args
from main import main

FAST_INI = """
[grid]
grid_min_deg = -10
grid_max_deg = 10

[experiment]
aoa_min_deg = -10
aoa_max_deg = 10
num_snapshots = 64
num_trials = 1
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "fast.ini"
    path.write_text(FAST_INI)
    return str(path)


def test_parser_lists_and_defaults():
    args = build_parser().parse_args(["sweep", "--axis", "snr", "--values", "0, 5,10", "--out", "x.csv"])
    assert args.values == [0.0, 5.0, 10.0]
    assert args.trials is None
    bench = build_parser().parse_args(["bench", "--cells", "16,32", "--out", "b.csv"])
    assert bench.cells == [16, 32]


@pytest.mark.parametrize("argv", [
    ["sweep", "--axis", "snr", "--values", "a,b", "--out", "x.csv"],
    ["sweep", "--axis", "bandwidth", "--values", "1", "--out", "x.csv"],
    ["traces", "--solver", "both", "--out", "t.csv"],
    [],
])
def test_parser_rejects_bad_arguments(argv):
    with pytest.raises(SystemExit):
        build_parser().parse_args(argv)


def test_simulate_prints_record(config_file, capsys):
    assert main(["simulate", "--config", config_file, "--seed", "3"]) == 0
    output = json.loads(capsys.readouterr().out)
    assert output["master_seed"] == 3
    assert len(output["true_deg"]) == 3
    assert set(output["solvers"]) == {"nnlasso", "sic"}
    for solver in output["solvers"].values():
        assert len(solver["estimate_deg"]) == 3
        assert solver["rmse_rad"] >= 0
        assert isinstance(solver["flags"]["detection_failure"], bool)


def test_simulate_single_solver(config_file, capsys):
    assert main(["simulate", "--config", config_file, "--solver", "sic"]) == 0
    assert set(json.loads(capsys.readouterr().out)["solvers"]) == {"sic"}


def test_dictionary_cache_round_trip(config_file, tmp_path, capsys):
    cache = str(tmp_path / "dict.bin")
    assert main(["build-dict", "--config", config_file, "--out", cache]) == 0
    assert main(["simulate", "--config", config_file, "--dictionary", cache]) == 0
    capsys.readouterr()

    other = tmp_path / "other.ini"
    other.write_text(FAST_INI + "\n[array]\nnum_cells = 32\n")
    assert main(["simulate", "--config", str(other), "--dictionary", cache]) == 2


def test_sweep_writes_reports(config_file, tmp_path):
    out = tmp_path / "snr.csv"
    trials_out = tmp_path / "snr_trials.csv"
    code = main(["sweep", "--config", config_file, "--axis", "snr", "--values", "0,10",
                 "--trials", "2", "--out", str(out), "--trials-out", str(trials_out)])
    assert code == 0
    summary = pd.read_csv(out)
    assert len(summary) == 4
    assert len(pd.read_csv(trials_out)) == 2 * 2 * 2 * 3
    meta = json.loads((tmp_path / "snr.meta.json").read_text())
    assert meta["num_trials"] == 2
    assert meta["axis_values"] == [0.0, 10.0]
    assert "common random numbers" in meta["seed_derivation"]


def test_bench_traces_and_field(config_file, tmp_path):
    assert main(["bench", "--config", config_file, "--cells", "16,32", "--repetitions", "1",
                 "--out", str(tmp_path / "bench.csv")]) == 0
    assert len(pd.read_csv(tmp_path / "bench.csv")) == 4

    assert main(["traces", "--config", config_file, "--solver", "sic",
                 "--out", str(tmp_path / "sic.csv")]) == 0
    assert len(pd.read_csv(tmp_path / "sic.csv")) == 4

    assert main(["field", "--config", config_file, "--theta", "3",
                 "--out", str(tmp_path / "field.csv")]) == 0
    assert len(pd.read_csv(tmp_path / "field.csv")) == 53 * 320


def test_errors_exit_with_status_two(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "missing.ini")]) == 2
    bad = tmp_path / "bad.ini"
    bad.write_text("[experiment]\nnum_users = 0\n")
    assert main(["simulate", "--config", str(bad)]) == 2


def test_count_axes_take_whole_numbers(capsys):
    args = parse_args(["sweep", "--axis", "users", "--values", "1,3", "--out", "x.csv"])
    assert args.values == [1, 3]
    assert parse_args(["sweep", "--axis", "snr", "--values", "2.5", "--out", "x.csv"]).values == [2.5]
    for axis in ("users", "cells"):
        with pytest.raises(SystemExit):
            parse_args(["sweep", "--axis", axis, "--values", "2,3.5", "--out", "x.csv"])
    assert "whole numbers" in capsys.readouterr().err


def test_cached_dictionary_must_cover_the_configured_grid(config_file, tmp_path, capsys):
    cache = str(tmp_path / "dict.bin")
    assert main(["build-dict", "--config", config_file, "--out", cache]) == 0
    shifted = tmp_path / "shifted.ini"
    shifted.write_text(FAST_INI.replace("grid_min_deg = -10", "grid_min_deg = -9")
                       .replace("grid_max_deg = 10", "grid_max_deg = 11")
                       .replace("aoa_min_deg = -10", "aoa_min_deg = -9"))
    assert main(["simulate", "--config", str(shifted)]) == 0
    capsys.readouterr()
    assert main(["simulate", "--config", str(shifted), "--dictionary", cache]) == 2
