"""
Configuration utility for the lens-assisted Rydberg receiver simulator.
Provides the shipped defaults (the 5 GHz, 64-cell operating point) and
configuration constants.
"""

import os
import subprocess


class Config:
    """
    Configuration class for the simulator.
    Contains default settings and configuration values.
    """

    # Application settings
    APP_NAME = "Rydberg Lens AoA"
    APP_VERSION = "0.1.0"

    # Physical constants
    SPEED_OF_LIGHT = 299_792_458.0
    ELEMENTARY_CHARGE = 1.602e-19
    BOHR_RADIUS = 5.292e-11
    HBAR = 1.0546e-34

    # RF lens (lengths in carrier wavelengths)
    CARRIER_FREQUENCY_HZ = 5.0e9
    APERTURE_WAVELENGTHS = 40.0
    FOCAL_WAVELENGTHS = 52.0
    SAMPLE_SPACING_WAVELENGTHS = 0.125
    STEP_WAVELENGTHS = 1.0
    PAD_FACTOR = 2

    # Vapor-cell array
    NUM_CELLS = 64
    CELL_SPACING_WAVELENGTHS = 0.5

    # Atomic transition (52D5/2 -> 53P3/2), dipole in units of q*a0
    DIPOLE_QA0 = (0.0, 1785.916, 0.0)
    COUPLING_WAVELENGTH_M = 509e-9
    PROBE_WAVELENGTH_M = 852e-9
    HBAR_SCALE = 1.0

    # AoA grid (degrees)
    GRID_MIN_DEG = -15.0
    GRID_MAX_DEG = 15.0
    GRID_SPACING_DEG = 0.1
    LIPSCHITZ_TOL = 1e-6
    LIPSCHITZ_MAX_ITER = 200
    LIPSCHITZ_SAFETY = 1.01

    # Experiment
    NUM_USERS = 3
    NUM_SNAPSHOTS = 1024
    SNR_DB = 5.0
    AOA_MIN_DEG = -15.0
    AOA_MAX_DEG = 15.0
    NUM_TRIALS = 1000
    MASTER_SEED = 0
    SOLVER = "both"
    MIN_SEPARATION_BINS = 2
    MAX_SCENARIO_REDRAWS = 10_000
    MAX_ASSIGNMENT_USERS = 8
    COMMON_RANDOM_NUMBERS = True
    BLOCK_FADING = False

    # Local oscillator: P_b |beta|^2 = ratio * total user power
    LO_POWER_RATIO = 10.0
    LO_PATH_GAIN = 1.0
    LO_ANGLE_DEG = 0.0

    # Noise levels listed for provenance; the operative level comes from SNR
    QSN_DBM = -191.0
    THERMAL_NOISE_DBM = -176.0

    # NN-LASSO / FISTA
    LAMBDA_SCALE = 0.002
    FISTA_TOL_SCALE = 1e-8
    FISTA_MAX_ITER = 2000
    SUPPORT_TAU_REL = 0.01
    # Clusters below this fraction of the heaviest cluster mass are not detections
    CLUSTER_MASS_REL = 0.2
    # A top cluster this many times heavier than the median of the others holds two users
    MERGE_MASS_RATIO = 1.7

    # SIC
    SIC_EXHAUSTION_REL = 1e-12

    # Snapshot generation chunk (bounds peak memory)
    SNAPSHOT_CHUNK = 4096

    # Benchmark
    BENCH_CELLS = (16, 32, 64, 128, 256)
    BENCH_REPETITIONS = 20

    # Environment variables
    WORKERS_ENV = "PROBE_WORKERS"
    LOG_LEVEL_ENV = "PROBE_LOG_LEVEL"

    _version = None

    @classmethod
    def wavelength(cls):
        """Carrier wavelength in meters."""
        return cls.SPEED_OF_LIGHT / cls.CARRIER_FREQUENCY_HZ

    @classmethod
    def dipole_moment(cls):
        """Default transition dipole moment in C*m."""
        qa0 = cls.ELEMENTARY_CHARGE * cls.BOHR_RADIUS
        return tuple(component * qa0 for component in cls.DIPOLE_QA0)

    @classmethod
    def worker_count(cls):
        """
        Worker-pool size taken from the environment.

        Returns:
            int: Number of workers (at least 1)
        """
        raw = os.environ.get(cls.WORKERS_ENV, "1")
        try:
            return max(1, int(raw))
        except ValueError:
            return 1

    @classmethod
    def version_string(cls):
        """
        Version written into run metadata.

        `git describe --tags --dirty` of the source checkout when available,
        v<APP_VERSION> otherwise. Looked up once per process.

        Returns:
            str: The version string
        """
        if cls._version is None:
            cls._version = cls._git_describe() or f"v{cls.APP_VERSION}"
        return cls._version

    @staticmethod
    def _git_describe():
        root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
        try:
            result = subprocess.run(
                ["git", "describe", "--tags", "--dirty"], cwd=root,
                capture_output=True, text=True, timeout=5, check=True,
            )
        except (OSError, subprocess.SubprocessError):
            return None
        return result.stdout.strip() or None
