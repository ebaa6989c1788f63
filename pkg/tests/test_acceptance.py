"""
Desk-scale reproductions. Minutes of runtime; run with `pytest -m slow`.
"""

import math

import numpy as np
import pytest

from core.dictionary import center
from core.experiment import ExperimentConfig
from core.measurement import (
    UserConfig,
    calibrate_noise,
    default_lo,
    expected_profile,
    simulate_measurements,
)
from core.sweep_manager import SweepManager

pytestmark = pytest.mark.slow


def relative_l2(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_profile_statistics_at_scale(receiver):
    users = UserConfig.equal_power(np.radians([-8.0, 3.0, 10.0]))
    sigma_q2 = calibrate_noise(users, receiver, 10.0)
    centered = []
    for ratio, seed in ((10.0, 1), (2.0, 2)):
        lo = default_lo(users, ratio=ratio)
        batch = simulate_measurements(users, lo, receiver, sigma_q2, 100_000, np.random.default_rng(seed))
        assert relative_l2(batch.y_bar, expected_profile(users, lo, receiver, sigma_q2)) < 0.03
        centered.append(batch.centered())
    reference = center(expected_profile(users, None, receiver, sigma_q2))
    for profile in centered:
        assert relative_l2(profile, reference) < 0.05


def test_rmse_falls_with_snr(dictionary):
    cfg = ExperimentConfig(num_trials=200, num_snapshots=1024)
    manager = SweepManager(cfg, dictionary=dictionary)
    _, summary = manager.run_sweep("snr", [-5.0, 0.0, 5.0, 10.0, 15.0])
    table = summary.pivot(index="axis_value", columns="solver", values="rmse_rad")
    # Monte-Carlo spread of an RMSE over T * K_U squared errors
    slack = 2.0 / math.sqrt(2 * cfg.num_trials * cfg.num_users)
    for solver in ("nnlasso", "sic"):
        curve = table[solver].to_numpy()
        assert np.all(curve[1:] <= curve[:-1] * (1 + slack)), (solver, curve)
    assert table.loc[10.0, "nnlasso"] < table.loc[10.0, "sic"]
    assert table.loc[10.0, "sic"] < 0.15


def test_rmse_with_five_users(dictionary):
    cfg = ExperimentConfig(snr_db=5.0, num_trials=200, num_snapshots=1024)
    manager = SweepManager(cfg, dictionary=dictionary)
    _, summary = manager.run_sweep("users", [5])
    rmse_by_solver = summary.set_index("solver")["rmse_rad"]
    assert rmse_by_solver["nnlasso"] < 0.3, rmse_by_solver
    assert rmse_by_solver["sic"] < 0.3, rmse_by_solver


def test_solver_runtime_scales_with_cells():
    manager = SweepManager(ExperimentConfig())
    bench = manager.runtime_bench(cells=[16, 32, 64, 128, 256], repetitions=20)
    fista = bench[bench["solver"] == "nnlasso"]
    sic = bench[bench["solver"] == "sic"]
    fista_slope = np.polyfit(np.log(fista["num_cells"]), np.log(fista["per_iteration_us"]), 1)[0]
    sic_slope = np.polyfit(np.log(sic["num_cells"]), np.log(sic["median_ms"]), 1)[0]
    assert fista_slope < 1.3, fista_slope
    assert sic_slope < 1.3, sic_slope
