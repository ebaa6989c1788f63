"""
Atomic dipole geometry.
Propagation directions, isotropic polarization draws, the
polarization-averaged projection gain and the Rabi / AT-split conversion.
"""

import math
from dataclasses import dataclass

import numpy as np

from core.errors import ConfigError, GeometryError
from utils.config import Config

_Y_AXIS = np.array([0.0, 1.0, 0.0])


@dataclass(frozen=True)
class DipoleSpec:
    """
    Transition dipole of the Rydberg pair and the readout wavelengths.

    hbar_scale multiplies every dipole projection (1/hbar in physical units,
    1 in the normalized units the estimators use).
    """

    mu_eg: tuple = tuple(Config.dipole_moment())
    lambda_c: float = Config.COUPLING_WAVELENGTH_M
    lambda_p: float = Config.PROBE_WAVELENGTH_M
    hbar_scale: float = Config.HBAR_SCALE

    def __post_init__(self):
        mu = np.asarray(self.mu_eg, dtype=float)
        if mu.shape != (3,) or not np.all(np.isfinite(mu)):
            raise ConfigError(f"mu_eg must be a finite 3-vector, got {self.mu_eg}")
        if not np.linalg.norm(mu) > 0:
            raise ConfigError("mu_eg must be nonzero")
        object.__setattr__(self, "mu_eg", tuple(float(v) for v in mu))
        for name in ("lambda_c", "lambda_p", "hbar_scale"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ConfigError(f"{name} must be positive, got {value}")

    @property
    def vector(self):
        return np.asarray(self.mu_eg, dtype=float)

    @property
    def norm_sq(self):
        return float(self.vector @ self.vector)

    def scaled(self, factor):
        """Same dipole with mu_eg multiplied by factor."""
        return DipoleSpec(tuple(factor * self.vector), self.lambda_c, self.lambda_p, self.hbar_scale)

    def to_dict(self):
        return {
            "mu_eg": list(self.mu_eg),
            "lambda_c": self.lambda_c,
            "lambda_p": self.lambda_p,
            "hbar_scale": self.hbar_scale,
        }


def _check_direction_angle(theta):
    if not math.isfinite(theta) or abs(theta) > math.pi / 2:
        raise GeometryError(f"angle must lie in [-pi/2, pi/2], got {theta}")


def propagation_direction(theta):
    """
    Unit propagation vector k(theta) = [sin(theta), 0, cos(theta)].

    Propagation is confined to the x-z plane with the cell array along x.
    """
    _check_direction_angle(theta)
    return np.array([math.sin(theta), 0.0, math.cos(theta)])


def polarization_basis(theta):
    """
    Orthonormal basis (e1, e2) of the plane orthogonal to k(theta).

    e1 = y, e2 = k x e1.
    """
    k_hat = propagation_direction(theta)
    return _Y_AXIS.copy(), np.cross(k_hat, _Y_AXIS)


def polarization_gain(theta, d):
    """
    Polarization-averaged projection gain.

    eta(theta) = (|mu|^2 - (mu . k(theta))^2) / 2

    Args:
        theta (float): Angle of arrival in radians
        d (DipoleSpec): Transition dipole

    Returns:
        float: eta(theta), clamped at 0 against round-off
    """
    mu = d.vector
    along = float(mu @ propagation_direction(theta))
    return max(0.5 * (float(mu @ mu) - along * along), 0.0)


def sample_polarizations(theta, rng, shape=()):
    """
    Batch of polarization vectors eps = cos(psi) e1 + sin(psi) e2, psi ~ U[0, 2pi).

    Args:
        theta (float): Angle of arrival in radians
        rng (numpy.random.Generator): Random stream
        shape (tuple): Leading batch shape

    Returns:
        numpy.ndarray: shape + (3,) unit vectors orthogonal to k(theta)
    """
    e1, e2 = polarization_basis(theta)
    psi = rng.uniform(0.0, 2.0 * math.pi, size=shape)
    return np.cos(psi)[..., None] * e1 + np.sin(psi)[..., None] * e2


def sample_polarization(theta, rng):
    """Single isotropic polarization draw for a wave arriving at theta."""
    return sample_polarizations(theta, rng, ())


def polarization_projections(theta, d, rng, shape=()):
    """
    Dipole projections mu . eps for a batch of polarization draws.

    Equivalent to sample_polarizations() followed by a dot product with mu,
    drawing the same psi values from rng.
    """
    e1, e2 = polarization_basis(theta)
    mu = d.vector
    psi = rng.uniform(0.0, 2.0 * math.pi, size=shape)
    return np.cos(psi) * float(mu @ e1) + np.sin(psi) * float(mu @ e2)


def rabi_at_split(omega, d):
    """
    AT splitting in Hz for a Rabi frequency in rad/s.

    delta_f = (lambda_c / lambda_p) * omega / (2 pi)
    """
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise ValueError("Rabi frequency must be nonnegative")
    split = (d.lambda_c / d.lambda_p) * omega / (2.0 * math.pi)
    return float(split) if split.ndim == 0 else split


def at_split_rabi(delta_f, d):
    """Inverse of rabi_at_split: Rabi frequency in rad/s for an AT split in Hz."""
    delta_f = np.asarray(delta_f, dtype=float)
    if np.any(delta_f < 0):
        raise ValueError("AT splitting must be nonnegative")
    omega = 2.0 * math.pi * delta_f * (d.lambda_p / d.lambda_c)
    return float(omega) if omega.ndim == 0 else omega


def physical_hbar_scale():
    """1/hbar, the dipole-projection scale of physical units."""
    return 1.0 / Config.HBAR
