"""
Sweep manager for Monte-Carlo experiments.
Runs trials over a parameter axis on a worker pool, aggregates RMSE and
produces the benchmark, convergence-trace and field tables.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pandas as pd

from core.dictionary import build_receiver_dictionary, center
from core.errors import DictionaryError
from core.experiment import draw_scenario, run_trial, trial_streams
from core.measurement import (
    UserConfig,
    calibrate_noise,
    default_lo,
    expected_profile,
    simulate_measurements,
)
from core.optics import propagate_stack
from core.solver_nnlasso import fista_solve, nnlasso_estimate
from core.solver_sic import sic_solve
from utils.config import Config
from utils.seeding import derive_seed

logger = logging.getLogger(__name__)

AXES = ("snr", "users", "cells", "aoa")
INTEGER_AXES = ("users", "cells")
TRACE_SCENARIO_DEG = (-8.0, 3.0, 10.0)
SUMMARY_COLUMNS = ["axis_value", "solver", "rmse_rad", "detection_failure_rate", "mean_solver_ms"]


def rmse(squared_errors):
    """sqrt(sum of squared errors / count), the RMSE over trials and users."""
    squared_errors = np.asarray(squared_errors, dtype=float)
    if squared_errors.size == 0:
        return 0.0
    return math.sqrt(float(squared_errors.sum()) / squared_errors.size)


def seed_scheme(cfg):
    """How trial seeds are derived, as recorded in report metadata."""
    if cfg.common_random_numbers:
        return "derive_seed(master_seed, 0, trial): common random numbers, shared by every axis value"
    return "derive_seed(master_seed, axis_index, trial)"


def trial_frame(records, axis_value=None):
    """
    Flatten trial records into a per-(trial, solver, user) DataFrame.

    Args:
        records (list): TrialRecord objects
        axis_value (float, optional): Sweep value stored with every row

    Returns:
        pandas.DataFrame: One row per matched user estimate
    """
    rows = []
    for record in records:
        rows.extend(record.to_rows(axis_value))
    return pd.DataFrame(rows)


def aggregate_rmse(frame):
    """
    Summary rows {axis_value, solver, rmse_rad, detection_failure_rate,
    mean_solver_ms} from a trial frame.

    Failure rate and timing are averaged per trial, RMSE over every
    (trial, user) pair.
    """
    if frame.empty:
        return pd.DataFrame(columns=SUMMARY_COLUMNS)

    per_trial = (
        frame.groupby(["axis_value", "solver", "trial"], sort=False, dropna=False)
        .agg(squared_error=("squared_error", "sum"),
             users=("squared_error", "size"),
             detection_failure=("detection_failure", "first"),
             solver_ms=("solver_ms", "first"))
        .reset_index()
    )
    summary = (
        per_trial.groupby(["axis_value", "solver"], sort=False, dropna=False)
        .agg(squared_error=("squared_error", "sum"),
             users=("users", "sum"),
             detection_failure_rate=("detection_failure", "mean"),
             mean_solver_ms=("solver_ms", "mean"))
        .reset_index()
    )
    summary["rmse_rad"] = np.sqrt(summary["squared_error"] / summary["users"])
    summary["detection_failure_rate"] = summary["detection_failure_rate"].astype(float)
    return summary[SUMMARY_COLUMNS]


class SweepManager:
    """
    Manages dictionaries, the worker pool and sweeps for one experiment.
    """

    def __init__(self, cfg, workers=None, dictionary=None):
        """
        Initialize the sweep manager.

        Args:
            cfg (ExperimentConfig): Base experiment
            workers (int, optional): Worker-pool size (PROBE_WORKERS by default)
            dictionary (PowerDictionary, optional): Prebuilt dictionary for cfg
        """
        self.cfg = cfg
        self.workers = workers or Config.worker_count()
        self.dictionaries = {}
        if dictionary is not None:
            if dictionary.fingerprint and dictionary.fingerprint != cfg.receiver.fingerprint():
                raise DictionaryError("the supplied dictionary was built for a different receiver")
            if not dictionary.grid.matches(cfg.grid):
                raise DictionaryError("the supplied dictionary was built over a different AoA grid")
            self.dictionaries[self._cache_key(cfg)] = dictionary

    @staticmethod
    def _cache_key(cfg):
        grid = cfg.grid
        return cfg.receiver.fingerprint(), len(grid), round(grid.min, 12), round(grid.spacing, 15)

    def get_dictionary(self, cfg=None):
        """
        Dictionary for cfg's receiver and AoA grid, built once and reused.

        Returns:
            PowerDictionary: The cached or freshly built dictionary
        """
        cfg = cfg or self.cfg
        key = self._cache_key(cfg)
        dictionary = self.dictionaries.get(key)
        if dictionary is None:
            logger.info("Building dictionary for %d cells", cfg.num_cells)
            dictionary = build_receiver_dictionary(cfg.receiver, cfg.grid, workers=self.workers)
            self.dictionaries[key] = dictionary
        return dictionary

    def axis_config(self, axis, value):
        """
        Experiment and pinned scenario for one sweep point.

        Returns:
            tuple: (ExperimentConfig, UserConfig or None)
        """
        if axis in INTEGER_AXES and float(value) != int(value):
            raise ValueError(f"sweep axis {axis} takes whole numbers, got {value}")
        if axis == "snr":
            return self.cfg.replace(snr_db=float(value)), None
        if axis == "users":
            return self.cfg.replace(num_users=int(value)), None
        if axis == "cells":
            return self.cfg.with_cells(int(value)), None
        if axis == "aoa":
            theta = math.radians(float(value))
            if not self.cfg.grid.contains(theta, theta):
                raise ValueError(f"AoA {value} deg lies outside the grid")
            return self.cfg.replace(num_users=1), UserConfig.equal_power([theta])
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {', '.join(AXES)}")

    def trial_seed(self, axis_index, trial_index):
        """Seed of one trial; every axis value shares seeds under common random numbers."""
        axis_key = 0 if self.cfg.common_random_numbers else axis_index
        return derive_seed(self.cfg.master_seed, axis_key, trial_index)

    def run_trials(self, cfg, axis_index=0, users=None):
        """
        All cfg.num_trials trials of one sweep point, in trial order.

        Returns:
            list: TrialRecord objects
        """
        dictionary = self.get_dictionary(cfg)
        seeds = [self.trial_seed(axis_index, t) for t in range(cfg.num_trials)]

        def one(trial_index):
            return run_trial(cfg, dictionary, seeds[trial_index], trial_index, users=users)

        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                records = list(pool.map(one, range(cfg.num_trials)))
        else:
            records = [one(t) for t in range(cfg.num_trials)]

        stalled = sum(1 for r in records for f in r.flags.values() if not f.get("converged", True))
        if stalled:
            logger.info("%d solver run(s) stopped at the iteration cap", stalled)
        return records

    def run_sweep(self, axis, values):
        """
        Run the trials of every axis value.

        Args:
            axis (str): snr | users | cells | aoa
            values (list): Axis values (dB, users, cells or degrees)

        Returns:
            tuple: (per-trial DataFrame, summary DataFrame)
        """
        frames = []
        for axis_index, value in enumerate(values):
            cfg, users = self.axis_config(axis, value)
            started = time.perf_counter()
            records = self.run_trials(cfg, axis_index, users)
            frames.append(trial_frame(records, axis_value=float(value)))
            logger.info("Sweep %s=%s: %d trial(s) in %.1f s", axis, value, len(records),
                        time.perf_counter() - started)
        trials = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()
        return trials, aggregate_rmse(trials)

    def runtime_bench(self, cells=Config.BENCH_CELLS, repetitions=Config.BENCH_REPETITIONS):
        """
        Median solver wall time per array size, dictionary build excluded.

        NN-LASSO is also timed per FISTA iteration (traces off).

        Returns:
            pandas.DataFrame: Rows {num_cells, solver, median_ms, iterations,
            per_iteration_us}
        """
        if repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        rows = []
        for num_cells in cells:
            cfg = self.cfg.with_cells(int(num_cells))
            dictionary = self.get_dictionary(cfg)
            y = self._bench_profile(cfg)

            sic_ms = []
            fista_ms = []
            iterations = []
            for _ in range(repetitions):
                start = time.perf_counter()
                sic_solve(dictionary, y, cfg.num_users)
                sic_ms.append(1e3 * (time.perf_counter() - start))

                start = time.perf_counter()
                result = fista_solve(dictionary.centered, y, cfg.fista_config,
                                     lipschitz=dictionary.lipschitz, record_traces=False)
                fista_ms.append(1e3 * (time.perf_counter() - start))
                iterations.append(result.iterations)

            per_iteration = [1e3 * ms / max(n, 1) for ms, n in zip(fista_ms, iterations)]
            rows.append({"num_cells": int(num_cells), "solver": "sic",
                         "median_ms": float(np.median(sic_ms)), "iterations": cfg.num_users,
                         "per_iteration_us": 1e3 * float(np.median(sic_ms)) / cfg.num_users})
            rows.append({"num_cells": int(num_cells), "solver": "nnlasso",
                         "median_ms": float(np.median(fista_ms)),
                         "iterations": int(np.median(iterations)),
                         "per_iteration_us": float(np.median(per_iteration))})
            logger.info("Benchmarked M=%d over %d repetition(s)", num_cells, repetitions)
        return pd.DataFrame(rows)

    def _bench_profile(self, cfg):
        """Centered profile of the master-seed trial, reused for every repetition."""
        scenario_rng, _ = trial_streams(self.trial_seed(0, 0))
        users = draw_scenario(cfg, rng=scenario_rng)
        receiver = cfg.receiver
        lo = default_lo(users, cfg.lo_power_ratio, cfg.lo_path_gain, math.radians(cfg.lo_angle_deg))
        profile = expected_profile(users, lo, receiver, 0.0)
        return center(profile)

    def traces(self, solver, noiseless=True):
        """
        Convergence traces on the three-user scenario at -8, 3 and 10 degrees.

        Args:
            solver (str): nnlasso or sic
            noiseless (bool): Use the expected profile instead of simulated snapshots

        Returns:
            pandas.DataFrame: nnlasso rows {iteration, objective, model_error};
            sic rows {stage, residual_energy, chosen_deg, amplitude}
        """
        cfg = self.cfg.replace(num_users=len(TRACE_SCENARIO_DEG))
        dictionary = self.get_dictionary(cfg)
        users = UserConfig.equal_power(np.radians(TRACE_SCENARIO_DEG))
        receiver = cfg.receiver
        lo = default_lo(users, cfg.lo_power_ratio, cfg.lo_path_gain, math.radians(cfg.lo_angle_deg))
        if noiseless:
            y = center(expected_profile(users, lo, receiver, 0.0))
        else:
            sigma_q2 = calibrate_noise(users, receiver, cfg.snr_linear)
            _, measurement_rng = trial_streams(derive_seed(cfg.master_seed, 0, 0))
            y = simulate_measurements(users, lo, receiver, sigma_q2, cfg.num_snapshots,
                                      measurement_rng, block_fading=cfg.block_fading).centered()

        if solver == "nnlasso":
            result = nnlasso_estimate(dictionary, y, users.num_users, cfg.fista_config)
            return pd.DataFrame({
                "iteration": np.arange(result.objective_trace.size),
                "objective": result.objective_trace,
                "model_error": result.model_error_trace,
            })
        if solver == "sic":
            result = sic_solve(dictionary, y, users.num_users)
            chosen = np.concatenate([[np.nan], np.degrees(dictionary.grid.angles[result.indices])])
            return pd.DataFrame({
                "stage": np.arange(result.residual_energy_trace.size),
                "residual_energy": result.residual_energy_trace,
                "chosen_deg": chosen,
                "amplitude": np.concatenate([[np.nan], result.amplitudes]),
            })
        raise ValueError(f"unknown solver {solver!r}")

    def field_table(self, theta_deg):
        """
        |u_n|^2 at every BPM depth for one angle, peak-normalized per depth.

        Returns:
            pandas.DataFrame: Rows {depth_index, z_m, x_m, intensity, normalized}
        """
        lens = self.cfg.receiver.lens
        stack = propagate_stack(math.radians(theta_deg), lens)
        intensity = np.abs(stack) ** 2
        peaks = intensity.max(axis=1, keepdims=True)
        normalized = np.divide(intensity, peaks, out=np.zeros_like(intensity), where=peaks > 0)
        depth, sample = np.indices(intensity.shape)
        return pd.DataFrame({
            "depth_index": depth.ravel(),
            "z_m": depth.ravel() * lens.step,
            "x_m": lens.coordinates()[sample.ravel()],
            "intensity": intensity.ravel(),
            "normalized": normalized.ravel(),
        })
