"""
Monte-Carlo trial logic.
Experiment configuration, scenario draws, optimal assignment of estimates to
users and the single-trial pipeline shared by sweeps and the CLI.
"""

import configparser
import dataclasses
import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from core.atomic import DipoleSpec
from core.dictionary import build_grid_degrees
from core.errors import ConfigError, ScenarioError
from core.measurement import (
    UserConfig,
    calibrate_noise,
    default_lo,
    simulate_measurements,
    snr_db_to_linear,
)
from core.optics import ArraySpec, LensSpec, ReceiverSpec, cell_responses
from core.solver_nnlasso import FistaConfig, nnlasso_estimate
from core.solver_sic import sic_solve
from utils.config import Config

logger = logging.getLogger(__name__)

SOLVERS = ("nnlasso", "sic")
SOLVER_CHOICES = SOLVERS + ("both",)

# INI section -> ExperimentConfig fields
SECTIONS = {
    "lens": ("carrier_frequency_hz", "aperture_wavelengths", "focal_wavelengths",
             "sample_spacing_wavelengths", "step_wavelengths", "pad_factor"),
    "array": ("num_cells", "cell_spacing_wavelengths"),
    "dipole": ("dipole_qa0", "coupling_wavelength_m", "probe_wavelength_m", "hbar_scale"),
    "grid": ("grid_min_deg", "grid_max_deg", "grid_spacing_deg"),
    "experiment": ("num_users", "num_snapshots", "snr_db", "aoa_min_deg", "aoa_max_deg",
                   "num_trials", "master_seed", "solver", "min_separation_bins",
                   "common_random_numbers", "block_fading", "on_grid",
                   "lo_power_ratio", "lo_path_gain", "lo_angle_deg"),
    "nnlasso": ("lambda_reg", "lambda_scale", "tol_scale", "max_iter", "support_tau_rel",
                "cluster_mass_rel", "merge_mass_ratio"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Everything a Monte-Carlo run depends on.

    Lengths are in carrier wavelengths and angles in degrees, the units of
    the configuration file. Derived objects (receiver, grid, solver
    settings) are built on first access.
    """

    carrier_frequency_hz: float = Config.CARRIER_FREQUENCY_HZ
    aperture_wavelengths: float = Config.APERTURE_WAVELENGTHS
    focal_wavelengths: float = Config.FOCAL_WAVELENGTHS
    sample_spacing_wavelengths: float = Config.SAMPLE_SPACING_WAVELENGTHS
    step_wavelengths: float = Config.STEP_WAVELENGTHS
    pad_factor: int = Config.PAD_FACTOR
    num_cells: int = Config.NUM_CELLS
    cell_spacing_wavelengths: float = Config.CELL_SPACING_WAVELENGTHS
    dipole_qa0: tuple = Config.DIPOLE_QA0
    coupling_wavelength_m: float = Config.COUPLING_WAVELENGTH_M
    probe_wavelength_m: float = Config.PROBE_WAVELENGTH_M
    hbar_scale: float = Config.HBAR_SCALE
    grid_min_deg: float = Config.GRID_MIN_DEG
    grid_max_deg: float = Config.GRID_MAX_DEG
    grid_spacing_deg: float = Config.GRID_SPACING_DEG
    num_users: int = Config.NUM_USERS
    num_snapshots: int = Config.NUM_SNAPSHOTS
    snr_db: float = Config.SNR_DB
    aoa_min_deg: float = Config.AOA_MIN_DEG
    aoa_max_deg: float = Config.AOA_MAX_DEG
    num_trials: int = Config.NUM_TRIALS
    master_seed: int = Config.MASTER_SEED
    solver: str = Config.SOLVER
    min_separation_bins: float = Config.MIN_SEPARATION_BINS
    common_random_numbers: bool = Config.COMMON_RANDOM_NUMBERS
    block_fading: bool = Config.BLOCK_FADING
    on_grid: bool = False
    lo_power_ratio: float = Config.LO_POWER_RATIO
    lo_path_gain: float = Config.LO_PATH_GAIN
    lo_angle_deg: float = Config.LO_ANGLE_DEG
    lambda_reg: float = None
    lambda_scale: float = Config.LAMBDA_SCALE
    tol_scale: float = Config.FISTA_TOL_SCALE
    max_iter: int = Config.FISTA_MAX_ITER
    support_tau_rel: float = Config.SUPPORT_TAU_REL
    cluster_mass_rel: float = Config.CLUSTER_MASS_REL
    merge_mass_ratio: float = Config.MERGE_MASS_RATIO

    def __post_init__(self):
        object.__setattr__(self, "dipole_qa0", tuple(float(v) for v in self.dipole_qa0))
        if self.num_trials < 1:
            raise ConfigError("num_trials must be at least 1")
        if self.num_snapshots < 1:
            raise ConfigError("num_snapshots must be at least 1")
        if not 1 <= self.num_users <= Config.MAX_ASSIGNMENT_USERS:
            raise ConfigError(f"num_users must lie in 1..{Config.MAX_ASSIGNMENT_USERS}, got {self.num_users}")
        if self.solver not in SOLVER_CHOICES:
            raise ConfigError(f"solver must be one of {', '.join(SOLVER_CHOICES)}, got {self.solver!r}")
        if self.min_separation_bins < 0:
            raise ConfigError("min_separation_bins must be nonnegative")
        if self.lo_power_ratio < 0:
            raise ConfigError("lo_power_ratio must be nonnegative")
        if not self.aoa_min_deg <= self.aoa_max_deg:
            raise ConfigError("aoa_min_deg must not exceed aoa_max_deg")
        slack = 1e-9
        if self.aoa_min_deg < self.grid_min_deg - slack or self.aoa_max_deg > self.grid_max_deg + slack:
            raise ConfigError(
                f"AoA range [{self.aoa_min_deg}, {self.aoa_max_deg}] deg lies outside the grid "
                f"[{self.grid_min_deg}, {self.grid_max_deg}] deg"
            )

    @classmethod
    def from_file(cls, filepath):
        """
        Load a configuration file; keys not given keep their defaults.

        Args:
            filepath (str): INI file with [lens] [array] [dipole] [grid]
                [experiment] [nnlasso] sections

        Returns:
            ExperimentConfig: The parsed configuration

        Raises:
            ConfigError: On unreadable files, unknown sections or keys, or bad values
        """
        parser = configparser.ConfigParser()
        try:
            with open(filepath, encoding="utf-8") as handle:
                parser.read_file(handle)
        except (OSError, configparser.Error) as e:
            raise ConfigError(f"cannot read configuration {filepath}: {e}") from e

        types = {f.name: f for f in dataclasses.fields(cls)}
        values = {}
        for section in parser.sections():
            if section not in SECTIONS:
                raise ConfigError(f"unknown configuration section [{section}]")
            for key, raw in parser.items(section):
                if key not in SECTIONS[section]:
                    raise ConfigError(f"unknown key {key!r} in section [{section}]")
                values[key] = _parse_value(types[key], raw, key)
        logger.debug("Loaded %d configuration value(s) from %s", len(values), filepath)
        return cls(**values)

    def to_dict(self):
        """Nested section -> key -> value echo of the configuration."""
        flat = dataclasses.asdict(self)
        flat["dipole_qa0"] = list(self.dipole_qa0)
        return {section: {key: flat[key] for key in keys} for section, keys in SECTIONS.items()}

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def with_cells(self, num_cells):
        """
        Same experiment with num_cells vapor cells.

        The spacing shrinks to min(d, (W - dx) / (M - 1)) so the array fits
        inside the aperture.
        """
        spacing = self.cell_spacing_wavelengths
        if num_cells > 1:
            spacing = min(spacing, (self.aperture_wavelengths - self.sample_spacing_wavelengths) / (num_cells - 1))
        return self.replace(num_cells=int(num_cells), cell_spacing_wavelengths=spacing)

    @cached_property
    def receiver(self):
        lens = LensSpec.from_wavelengths(
            self.carrier_frequency_hz, self.aperture_wavelengths, self.focal_wavelengths,
            self.sample_spacing_wavelengths, self.step_wavelengths, self.pad_factor,
        )
        array = ArraySpec(self.num_cells, self.cell_spacing_wavelengths * lens.wavelength)
        qa0 = Config.ELEMENTARY_CHARGE * Config.BOHR_RADIUS
        dipole = DipoleSpec(tuple(qa0 * v for v in self.dipole_qa0), self.coupling_wavelength_m,
                            self.probe_wavelength_m, self.hbar_scale)
        return ReceiverSpec(lens, array, dipole)

    @cached_property
    def grid(self):
        return build_grid_degrees(self.grid_min_deg, self.grid_max_deg, self.grid_spacing_deg)

    @property
    def aoa_range(self):
        return math.radians(self.aoa_min_deg), math.radians(self.aoa_max_deg)

    @property
    def snr_linear(self):
        return snr_db_to_linear(self.snr_db)

    @property
    def solvers(self):
        return SOLVERS if self.solver == "both" else (self.solver,)

    @property
    def fista_config(self):
        return FistaConfig(
            lambda_reg=self.lambda_reg,
            max_iter=self.max_iter,
            support_tau_rel=self.support_tau_rel,
            cluster_mass_rel=self.cluster_mass_rel,
            merge_mass_ratio=self.merge_mass_ratio,
            lambda_scale=self.lambda_scale,
            tol_scale=self.tol_scale,
        )


def _parse_value(field_def, raw, key):
    raw = raw.strip()
    try:
        if field_def.type is tuple:
            parts = tuple(float(p) for p in raw.split(","))
            if len(parts) != 3:
                raise ValueError("expected three comma-separated components")
            return parts
        if field_def.default is None and raw.lower() in ("", "auto", "none"):
            return None
        if field_def.type is bool:
            lowered = raw.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if field_def.type is str:
            return raw.lower()
        return field_def.type(raw)
    except ValueError as e:
        raise ConfigError(f"bad value for {key}: {e}") from e


@dataclass(eq=False)
class TrialRecord:
    """
    Outcome of one Monte-Carlo trial.

    Attributes:
        trial_index (int): Position of the trial in its sweep point
        trial_seed (int): Seed every random draw of the trial derives from
        true_angles (numpy.ndarray): Sorted user angles (radians)
        sigma_q2 (float): Calibrated shot-noise variance
        estimates (dict): Solver -> sorted estimated angles
        squared_errors (dict): Solver -> matched squared errors per user
        solver_ms (dict): Solver -> wall time in milliseconds
        flags (dict): Solver -> {"detection_failure", "converged", ...}
    """

    trial_index: int
    trial_seed: int
    true_angles: np.ndarray
    sigma_q2: float
    estimates: dict = field(default_factory=dict)
    squared_errors: dict = field(default_factory=dict)
    solver_ms: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    def to_rows(self, axis_value=None):
        """One flat row per (solver, user) for the trial frame."""
        rows = []
        for solver, estimates in self.estimates.items():
            for user, (truth, estimate, error) in enumerate(
                    zip(self.true_angles, estimates, self.squared_errors[solver])):
                rows.append({
                    "axis_value": axis_value,
                    "trial": self.trial_index,
                    "trial_seed": self.trial_seed,
                    "solver": solver,
                    "user": user,
                    "true_rad": float(truth),
                    "estimate_rad": float(estimate),
                    "squared_error": float(error),
                    "sigma_q2": self.sigma_q2,
                    "solver_ms": self.solver_ms[solver],
                    "detection_failure": bool(self.flags[solver]["detection_failure"]),
                    "converged": bool(self.flags[solver].get("converged", True)),
                })
        return rows


def trial_streams(trial_seed):
    """Independent scenario and measurement generators for one trial."""
    scenario, measurement = np.random.SeedSequence(int(trial_seed)).spawn(2)
    return np.random.default_rng(scenario), np.random.default_rng(measurement)


def draw_scenario(cfg, trial_seed=None, rng=None, on_grid=None):
    """
    Draw K_U user angles uniformly over the AoA range with unit powers.

    Sets are redrawn until every pair is at least min_separation_bins grid
    steps apart.

    Args:
        cfg (ExperimentConfig): Experiment settings
        trial_seed (int, optional): Seed of the trial (scenario stream)
        rng (numpy.random.Generator, optional): Explicit stream; overrides trial_seed
        on_grid (bool, optional): Snap angles to grid points; defaults to cfg.on_grid

    Returns:
        UserConfig: Sorted user angles with unit powers

    Raises:
        ScenarioError: If no valid set is found within the redraw cap
    """
    if rng is None:
        rng = trial_streams(0 if trial_seed is None else trial_seed)[0]
    on_grid = cfg.on_grid if on_grid is None else on_grid
    grid = cfg.grid
    lo, hi = cfg.aoa_range
    separation = cfg.min_separation_bins * grid.spacing

    for _ in range(Config.MAX_SCENARIO_REDRAWS):
        angles = np.sort(rng.uniform(lo, hi, size=cfg.num_users))
        if on_grid:
            angles = np.sort(grid.angles[[grid.nearest_index(a) for a in angles]])
        if cfg.num_users < 2 or np.min(np.diff(angles)) >= separation - 1e-12:
            return UserConfig.equal_power(angles)
    raise ScenarioError(
        f"could not place {cfg.num_users} users {cfg.min_separation_bins} bins apart in "
        f"[{cfg.aoa_min_deg}, {cfg.aoa_max_deg}] deg after {Config.MAX_SCENARIO_REDRAWS} draws"
    )


def match_and_error(estimates, truth):
    """
    Squared errors under the assignment that minimizes their sum.

    Args:
        estimates (array-like): Estimated angles
        truth (array-like): True angles

    Returns:
        numpy.ndarray: Squared error for each true angle, in truth order

    Raises:
        ValueError: On a length mismatch or more users than exhaustive search supports
    """
    estimates = np.asarray(estimates, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimates.shape != truth.shape:
        raise ValueError(f"{estimates.size} estimates for {truth.size} users")
    if truth.size > Config.MAX_ASSIGNMENT_USERS:
        raise ValueError(
            f"exhaustive assignment supports at most {Config.MAX_ASSIGNMENT_USERS} users"
        )

    best, best_total = None, math.inf
    for order in itertools.permutations(range(truth.size)):
        errors = (estimates[list(order)] - truth) ** 2
        total = float(errors.sum())
        if total < best_total:
            best, best_total = errors, total
    return best if best is not None else np.zeros(0)


def run_trial(cfg, dictionary, trial_seed, trial_index=0, users=None):
    """
    One Monte-Carlo trial: scenario, noise calibration, snapshots, solvers.

    Args:
        cfg (ExperimentConfig): Experiment settings
        dictionary (PowerDictionary): Dictionary for cfg.receiver
        trial_seed (int): Seed of every random draw in the trial
        trial_index (int): Index recorded in the result
        users (UserConfig, optional): Fixed scenario instead of a random draw

    Returns:
        TrialRecord: Angles, errors, timings and solver flags
    """
    scenario_rng, measurement_rng = trial_streams(trial_seed)
    if users is None:
        users = draw_scenario(cfg, rng=scenario_rng)
    receiver = cfg.receiver

    responses = cell_responses(users.angles, receiver.lens, receiver.array)
    sigma_q2 = calibrate_noise(users, receiver, cfg.snr_linear, responses)
    lo = default_lo(users, cfg.lo_power_ratio, cfg.lo_path_gain, math.radians(cfg.lo_angle_deg))
    batch = simulate_measurements(users, lo, receiver, sigma_q2, cfg.num_snapshots,
                                  measurement_rng, responses=responses,
                                  block_fading=cfg.block_fading)
    y = batch.centered()

    record = TrialRecord(trial_index, int(trial_seed), np.sort(users.angles), sigma_q2)
    for solver in cfg.solvers:
        start = time.perf_counter()
        if solver == "nnlasso":
            result = nnlasso_estimate(dictionary, y, users.num_users, cfg.fista_config,
                                      record_traces=False)
            flags = {"detection_failure": result.under_detected, "converged": result.converged,
                     "iterations": result.iterations}
        else:
            result = sic_solve(dictionary, y, users.num_users)
            flags = {"detection_failure": result.early_exhaustion, "converged": True}
        elapsed_ms = 1e3 * (time.perf_counter() - start)

        record.estimates[solver] = result.angles
        record.squared_errors[solver] = match_and_error(result.angles, record.true_angles)
        record.solver_ms[solver] = elapsed_ms
        record.flags[solver] = flags
    return record
