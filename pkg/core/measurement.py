"""
Snapshot-level simulation of the magnitude-only receiver.
Users and the local oscillator are projected onto the atomic dipole through
random polarizations, quantum shot noise is added inside the magnitude, and
snapshots are averaged into the power profile the solvers consume.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from core.atomic import polarization_gain, polarization_projections, rabi_at_split
from core.dictionary import center
from core.errors import ConfigError
from core.optics import cell_responses
from utils.config import Config

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class UserConfig:
    """Angles (radians) and transmit powers of the K_U users."""

    angles: np.ndarray
    powers: np.ndarray

    def __post_init__(self):
        angles = np.atleast_1d(np.asarray(self.angles, dtype=float))
        powers = np.atleast_1d(np.asarray(self.powers, dtype=float))
        if angles.shape != powers.shape or angles.ndim != 1:
            raise ConfigError("user angles and powers must be vectors of equal length")
        if np.any(~np.isfinite(angles)) or np.any(np.abs(angles) >= math.pi / 2):
            raise ConfigError("user angles must be finite and inside (-pi/2, pi/2)")
        if np.any(~(powers > 0)):
            raise ConfigError("user powers must be positive")
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "powers", powers)

    @classmethod
    def equal_power(cls, angles, power=1.0):
        angles = np.atleast_1d(np.asarray(angles, dtype=float))
        return cls(angles, np.full(angles.shape, float(power)))

    @property
    def num_users(self):
        return int(self.angles.size)

    @property
    def total_power(self):
        return float(self.powers.sum())


@dataclass(frozen=True)
class LoConfig:
    """Local oscillator: transmit power P_b, path gain beta and angle theta_b."""

    power: float
    path_gain: complex = Config.LO_PATH_GAIN
    angle: float = math.radians(Config.LO_ANGLE_DEG)

    def __post_init__(self):
        if not math.isfinite(self.power) or self.power < 0:
            raise ConfigError(f"LO power must be >= 0, got {self.power}")
        if not abs(self.path_gain) > 0:
            raise ConfigError("LO path gain must be nonzero")
        if not math.isfinite(self.angle) or abs(self.angle) >= math.pi / 2:
            raise ConfigError(f"LO angle must lie in (-pi/2, pi/2), got {self.angle}")

    @property
    def received_power(self):
        """P_b |beta|^2."""
        return self.power * abs(self.path_gain) ** 2


@dataclass(frozen=True, eq=False)
class MeasurementBatch:
    """
    Per-snapshot magnitudes and their time-averaged power profile.

    Attributes:
        snapshots (numpy.ndarray): K_snap x M magnitudes y^(k)
        y_bar (numpy.ndarray): Mean of the squared snapshots, length M
        sigma_q2 (float): Shot-noise variance per complex sample
    """

    snapshots: np.ndarray
    y_bar: np.ndarray
    sigma_q2: float

    @property
    def num_snapshots(self):
        return int(self.snapshots.shape[0])

    def centered(self):
        """Centered power profile."""
        return center(self.y_bar)

    def at_splits(self, dipole):
        """AT splits (Hz) corresponding to each snapshot's Rabi magnitudes."""
        return rabi_at_split(self.snapshots, dipole)


def snr_db_to_linear(snr_db):
    return 10.0 ** (snr_db / 10.0)


def linear_to_snr_db(snr):
    return 10.0 * math.log10(snr)


def default_lo(users, ratio=Config.LO_POWER_RATIO, path_gain=Config.LO_PATH_GAIN,
               angle=math.radians(Config.LO_ANGLE_DEG)):
    """
    LO whose received power P_b |beta|^2 is ratio times the total user power.

    Returns:
        LoConfig: The default local oscillator
    """
    power = ratio * users.total_power / abs(path_gain) ** 2
    return LoConfig(power, path_gain, angle)


def _complex_normal(rng, shape, variance=1.0):
    """Circularly-symmetric complex Gaussian draws with the given variance."""
    draws = rng.standard_normal(shape + (2,))
    return math.sqrt(variance / 2.0) * (draws[..., 0] + 1j * draws[..., 1])


def _user_responses(users, receiver, responses):
    if responses is not None:
        return np.asarray(responses)
    if users.num_users == 0:
        return np.zeros((0, receiver.array.num_cells), dtype=complex)
    return cell_responses(users.angles, receiver.lens, receiver.array)


def snapshot_user_field(users, receiver, rng, responses=None, fading=None, projections=None):
    """
    One snapshot of the user-induced field at every cell.

    x_m = hbar_scale * sum_k (mu . eps_mk) sqrt(P_k) alpha_k a_lens(m; theta_k) s_k

    Args:
        users (UserConfig): User angles and powers
        receiver (ReceiverSpec): Lens, array and dipole
        rng (numpy.random.Generator): Random stream
        responses (numpy.ndarray, optional): Precomputed K x M lens responses
        fading (numpy.ndarray, optional): Fixed alpha_k instead of CN(0, 1) draws
        projections (numpy.ndarray, optional): Fixed K x M projections mu . eps

    Returns:
        numpy.ndarray: Complex field, length M
    """
    num_cells = receiver.array.num_cells
    if users.num_users == 0:
        return np.zeros(num_cells, dtype=complex)

    responses = _user_responses(users, receiver, responses)
    alpha = _complex_normal(rng, (users.num_users,)) if fading is None else np.asarray(fading)
    symbols = np.exp(1j * rng.uniform(0.0, 2.0 * math.pi, size=users.num_users))
    if projections is None:
        projections = np.stack([
            polarization_projections(float(theta), receiver.dipole, rng, (num_cells,))
            for theta in users.angles
        ])

    weights = np.sqrt(users.powers) * alpha * symbols
    return receiver.dipole.hbar_scale * np.sum(weights[:, None] * projections * responses, axis=0)


def snapshot_lo(lo, dipole, rng, num_cells):
    """
    One snapshot of the LO field: hbar_scale (mu . eps_mb) sqrt(P_b) beta e^{j phi_b}.

    The phase phi_b is drawn once per snapshot, the polarization once per cell.
    """
    phase = np.exp(1j * rng.uniform(0.0, 2.0 * math.pi))
    projections = polarization_projections(lo.angle, dipole, rng, (num_cells,))
    return dipole.hbar_scale * projections * math.sqrt(lo.power) * lo.path_gain * phase


def measure_snapshot(x, b, sigma_q2, rng):
    """
    Magnitude-only observation y = |x + b + n_q|, n_q ~ CN(0, sigma_q2 I).

    Returns:
        numpy.ndarray: Nonnegative magnitudes
    """
    x = np.asarray(x)
    if np.shape(b) != x.shape:
        raise ValueError(f"user field {x.shape} and LO field {np.shape(b)} differ in shape")
    if sigma_q2 < 0:
        raise ValueError("noise variance must be nonnegative")
    noise = _complex_normal(rng, x.shape, sigma_q2)
    return np.abs(x + b + noise)


def average_power(snapshots):
    """
    Time-averaged power profile (1/K) sum_k (y^(k))^2.

    Args:
        snapshots (numpy.ndarray): K_snap x M magnitudes (or a single M-vector)

    Returns:
        numpy.ndarray: Length-M power profile
    """
    snapshots = np.atleast_2d(np.asarray(snapshots, dtype=float))
    if snapshots.shape[0] < 1:
        raise ValueError("at least one snapshot is required")
    return np.mean(snapshots ** 2, axis=0)


def simulate_measurements(users, lo, receiver, sigma_q2, num_snapshots, rng,
                          responses=None, block_fading=Config.BLOCK_FADING,
                          chunk=Config.SNAPSHOT_CHUNK):
    """
    Simulate K_snap snapshots and their power profile.

    Snapshots are generated in chunks. Every snapshot redraws fading, symbols,
    polarizations, LO phase and noise; with block_fading the fading
    coefficients are drawn once for the whole batch. The noise draw is made
    even when sigma_q2 is 0.

    Args:
        users (UserConfig): User angles and powers
        lo (LoConfig): Local oscillator
        receiver (ReceiverSpec): Lens, array and dipole
        sigma_q2 (float): Shot-noise variance
        num_snapshots (int): K_snap
        rng (numpy.random.Generator): Random stream
        responses (numpy.ndarray, optional): Precomputed K x M lens responses
        block_fading (bool): Freeze alpha_k over the batch
        chunk (int): Snapshots generated per vectorized block

    Returns:
        MeasurementBatch: Snapshots, power profile and noise variance
    """
    if num_snapshots < 1:
        raise ConfigError("at least one snapshot is required")
    if sigma_q2 < 0:
        raise ConfigError("noise variance must be nonnegative")

    dipole = receiver.dipole
    num_cells = receiver.array.num_cells
    num_users = users.num_users
    responses = _user_responses(users, receiver, responses)
    amplitudes = np.sqrt(users.powers)
    lo_amplitude = math.sqrt(lo.power) * lo.path_gain
    frozen_alpha = _complex_normal(rng, (num_users,)) if block_fading else None

    snapshots = np.empty((num_snapshots, num_cells))
    for start in range(0, num_snapshots, chunk):
        n = min(chunk, num_snapshots - start)

        alpha = frozen_alpha[None, :] if block_fading else _complex_normal(rng, (n, num_users))
        symbols = np.exp(1j * rng.uniform(0.0, 2.0 * math.pi, size=(n, num_users)))
        projections = np.empty((n, num_users, num_cells))
        for k, theta in enumerate(users.angles):
            projections[:, k, :] = polarization_projections(float(theta), dipole, rng, (n, num_cells))
        weights = amplitudes * alpha * symbols
        x = np.einsum("nk,nkm,km->nm", weights, projections, responses)

        lo_phase = np.exp(1j * rng.uniform(0.0, 2.0 * math.pi, size=n))
        lo_projections = polarization_projections(lo.angle, dipole, rng, (n, num_cells))
        b = lo_amplitude * lo_phase[:, None] * lo_projections

        noise = _complex_normal(rng, (n, num_cells), sigma_q2)
        snapshots[start:start + n] = np.abs(dipole.hbar_scale * (x + b) + noise)

    y_bar = average_power(snapshots)
    logger.debug("Simulated %d snapshots for %d user(s), sigma_q2=%.3e",
                 num_snapshots, num_users, sigma_q2)
    return MeasurementBatch(snapshots, y_bar, float(sigma_q2))


def user_signal_energy(users, receiver, responses=None):
    """
    E||A* s||^2 = sum_k P_k hbar^2 eta(theta_k) sum_m |a_lens(m; theta_k)|^2.

    Cross terms vanish under independent fading, symbols and polarizations.
    """
    if users.num_users == 0:
        return 0.0
    responses = _user_responses(users, receiver, responses)
    gains = np.array([polarization_gain(float(t), receiver.dipole) for t in users.angles])
    per_user = gains * np.sum(np.abs(responses) ** 2, axis=1)
    return float(receiver.dipole.hbar_scale ** 2 * np.sum(users.powers * per_user))


def calibrate_noise(users, receiver, target_snr, responses=None):
    """
    Shot-noise variance that yields the target received SNR.

    sigma_q2 = E||A* s||^2 / (M * snr)

    Args:
        users (UserConfig): User angles and powers
        receiver (ReceiverSpec): Lens, array and dipole
        target_snr (float): Linear SNR (> 0, may be inf)
        responses (numpy.ndarray, optional): Precomputed K x M lens responses

    Returns:
        float: sigma_q2
    """
    if not target_snr > 0:
        raise ConfigError(f"target SNR must be positive, got {target_snr}")
    if math.isinf(target_snr):
        return 0.0
    energy = user_signal_energy(users, receiver, responses)
    return energy / (receiver.array.num_cells * target_snr)


def expected_profile(users, lo, receiver, sigma_q2, responses=None):
    """
    Expected power profile: user atoms, plus the LO floor, plus sigma_q2.

    Returns:
        numpy.ndarray: Length-M expected y_bar
    """
    dipole = receiver.dipole
    hbar_sq = dipole.hbar_scale ** 2
    profile = np.full(receiver.array.num_cells, float(sigma_q2))
    if lo is not None:
        profile += hbar_sq * lo.received_power * polarization_gain(lo.angle, dipole)
    if users.num_users:
        responses = _user_responses(users, receiver, responses)
        gains = np.array([polarization_gain(float(t), dipole) for t in users.angles])
        weights = hbar_sq * users.powers * gains
        profile += weights @ (np.abs(responses) ** 2)
    return profile
