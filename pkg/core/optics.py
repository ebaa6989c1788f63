"""
RF lens optics.
Discrete Fresnel beam propagation (BPM) through the lens aperture and
sampling of the focal-plane field at the vapor-cell positions.
"""

import hashlib
import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from core.atomic import DipoleSpec
from core.errors import GeometryError
from utils.config import Config

logger = logging.getLogger(__name__)

_INTEGER_TOL = 1e-9


def _round_half_up(values):
    """Round half-up (floor(x + 1/2)), elementwise."""
    return np.floor(np.asarray(values, dtype=float) + 0.5).astype(int)


@dataclass(frozen=True)
class LensSpec:
    """
    Geometry of the RF lens aperture and the BPM sampling grid.

    All lengths are in meters. The thin-lens relation f = R / (n - 1) is
    available through from_curvature(); otherwise f is taken as given.
    """

    wavelength: float
    aperture_width: float
    focal_length: float
    sample_spacing: float
    step: float
    pad_factor: int = Config.PAD_FACTOR

    def __post_init__(self):
        for name in ("wavelength", "aperture_width", "focal_length", "sample_spacing", "step"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise GeometryError(f"{name} must be a positive finite length, got {value}")
        if int(self.pad_factor) != self.pad_factor or self.pad_factor < 1:
            raise GeometryError(f"pad_factor must be an integer >= 1, got {self.pad_factor}")

        ratio = self.aperture_width / self.sample_spacing
        if abs(ratio - round(ratio)) > _INTEGER_TOL * max(1.0, ratio) or round(ratio) < 1:
            raise GeometryError(
                f"aperture width / sample spacing must be a positive integer, got {ratio:.6f}"
            )
        if self.sample_spacing >= self.wavelength:
            raise GeometryError("aperture sampling must be sub-wavelength (sample_spacing < wavelength)")
        if self.num_steps < 1:
            raise GeometryError("focal_length / step must round to at least one BPM step")

    @classmethod
    def from_wavelengths(cls, carrier_frequency_hz=Config.CARRIER_FREQUENCY_HZ,
                         aperture=Config.APERTURE_WAVELENGTHS,
                         focal=Config.FOCAL_WAVELENGTHS,
                         sample_spacing=Config.SAMPLE_SPACING_WAVELENGTHS,
                         step=Config.STEP_WAVELENGTHS,
                         pad_factor=Config.PAD_FACTOR):
        """
        Build a lens from lengths expressed in carrier wavelengths.

        Args:
            carrier_frequency_hz (float): RF carrier frequency
            aperture (float): Aperture width W in wavelengths
            focal (float): Focal length f in wavelengths
            sample_spacing (float): Aperture sample spacing in wavelengths
            step (float): Propagation step in wavelengths
            pad_factor (int): Zero-padding factor of the BPM window

        Returns:
            LensSpec: The lens geometry in meters
        """
        wavelength = Config.SPEED_OF_LIGHT / carrier_frequency_hz
        return cls(
            wavelength=wavelength,
            aperture_width=aperture * wavelength,
            focal_length=focal * wavelength,
            sample_spacing=sample_spacing * wavelength,
            step=step * wavelength,
            pad_factor=int(pad_factor),
        )

    @classmethod
    def from_curvature(cls, wavelength, aperture_width, radius, permittivity,
                       sample_spacing, step, pad_factor=Config.PAD_FACTOR):
        """Build a lens whose focal length follows the thin-lens relation."""
        index = math.sqrt(permittivity)
        if index <= 1.0:
            raise GeometryError("lens permittivity must exceed 1 for a converging lens")
        return cls(wavelength, aperture_width, radius / (index - 1.0), sample_spacing, step, pad_factor)

    @property
    def num_samples(self):
        """N_s, the aperture sample count."""
        return int(round(self.aperture_width / self.sample_spacing))

    @property
    def num_steps(self):
        """n_f = round(f / dz), ties away from zero."""
        return int(math.floor(self.focal_length / self.step + 0.5))

    @property
    def wavenumber(self):
        return 2.0 * math.pi / self.wavelength

    @property
    def padded_size(self):
        return self.num_samples * int(self.pad_factor)

    @property
    def window_start(self):
        """Offset of the aperture inside the zero-padded BPM window."""
        return (self.padded_size - self.num_samples) // 2

    @property
    def step_log_gain(self):
        """ln|e^{jk dz} / (j lambda dz)|, accumulated once per BPM step."""
        return -math.log(self.wavelength * self.step)

    def coordinates(self):
        """
        Aperture sample coordinates x_p = (p - 1 - (N_s - 1)/2) dx.

        Returns:
            numpy.ndarray: N_s coordinates in meters
        """
        n = self.num_samples
        return (np.arange(n) - (n - 1) / 2.0) * self.sample_spacing

    def to_dict(self):
        return {
            "wavelength": self.wavelength,
            "aperture_width": self.aperture_width,
            "focal_length": self.focal_length,
            "sample_spacing": self.sample_spacing,
            "step": self.step,
            "pad_factor": int(self.pad_factor),
        }


@dataclass(frozen=True)
class ArraySpec:
    """Uniform line array of vapor cells along the lens-horizontal axis."""

    num_cells: int
    spacing: float

    def __post_init__(self):
        if int(self.num_cells) != self.num_cells or self.num_cells < 1:
            raise GeometryError(f"num_cells must be a positive integer, got {self.num_cells}")
        if not math.isfinite(self.spacing) or self.spacing <= 0:
            raise GeometryError(f"cell spacing must be positive, got {self.spacing}")

    @property
    def span(self):
        return (self.num_cells - 1) * self.spacing

    def positions(self):
        """Cell coordinates x_m = (m - 1 - (M - 1)/2) d."""
        m = self.num_cells
        return (np.arange(m) - (m - 1) / 2.0) * self.spacing

    def fits(self, lens):
        return self.span <= lens.aperture_width

    def to_dict(self):
        return {"num_cells": int(self.num_cells), "spacing": self.spacing}


@dataclass(frozen=True, eq=False)
class ComplexField:
    """
    Sampled complex field across the aperture at one propagation depth.

    Scalar prefactors dropped from the samples are tracked in log_scale
    (natural log of their accumulated magnitude).
    """

    samples: np.ndarray
    log_scale: float = 0.0

    def intensity(self):
        return np.abs(self.samples) ** 2

    def normalized_magnitude(self):
        """|u| scaled to unit peak (all zeros stay zeros)."""
        magnitude = np.abs(self.samples)
        peak = magnitude.max() if magnitude.size else 0.0
        return magnitude / peak if peak > 0 else magnitude


def _check_angle(theta):
    if not math.isfinite(theta):
        raise GeometryError(f"angle must be finite, got {theta}")
    if abs(theta) >= math.pi / 2:
        raise GeometryError(f"angle must lie in (-pi/2, pi/2), got {theta}")


def _input_samples(thetas, lens):
    """Lens-plane fields for a vector of angles, shape (K, N_s)."""
    x = lens.coordinates()
    k = lens.wavenumber
    f = lens.focal_length
    sines = np.sin(np.asarray(thetas, dtype=float))[:, None]
    phase = -k * (x[None, :] ** 2 + 2.0 * f * x[None, :] * sines) / (2.0 * f)
    return np.exp(1j * phase)


def lens_input_field(theta, lens):
    """
    Field just behind the lens for a plane wave arriving at angle theta.

    u_0(p) = exp(-jk [x_p^2 + 2 f x_p sin(theta)] / (2f))

    Args:
        theta (float): Angle of arrival in radians, |theta| < pi/2
        lens (LensSpec): Lens geometry

    Returns:
        ComplexField: Unit-magnitude field with N_s samples
    """
    _check_angle(theta)
    return ComplexField(_input_samples([theta], lens)[0], 0.0)


def transfer_function(lens):
    """
    h_sys: spectrum of the Fresnel chirp exp(jk x^2 / (2 dz)) on the DFT
    frequency grid of the padded window, exp(-j pi lambda dz nu^2).

    Returns:
        numpy.ndarray: Unit-magnitude transfer function, padded_size samples
    """
    nu = np.fft.fftfreq(lens.padded_size, d=lens.sample_spacing)
    return np.exp(-1j * np.pi * lens.wavelength * lens.step * nu ** 2)


def _step_samples(samples, lens, transfer):
    """One BPM step on a (..., N_s) array: pad, filter, truncate."""
    start = lens.window_start
    n = lens.num_samples
    padded = np.zeros(samples.shape[:-1] + (lens.padded_size,), dtype=complex)
    padded[..., start:start + n] = samples
    propagated = np.fft.ifft(np.fft.fft(padded, axis=-1) * transfer, axis=-1)
    return propagated[..., start:start + n]


def fresnel_step(u, lens):
    """
    Advance a field by one propagation step dz.

    Computes IDFT(DFT(u) * h_sys) on the zero-padded window and truncates back
    to the aperture. The magnitude of the prefactor e^{jk dz}/(j lambda dz) is
    added to log_scale instead of multiplying the samples.

    Args:
        u (ComplexField): Field at depth z
        lens (LensSpec): Lens geometry

    Returns:
        ComplexField: Field at depth z + dz
    """
    samples = np.asarray(u.samples, dtype=complex)
    if samples.shape[-1] != lens.num_samples:
        raise GeometryError(
            f"field has {samples.shape[-1]} samples, lens expects {lens.num_samples}"
        )
    stepped = _step_samples(samples, lens, transfer_function(lens))
    return ComplexField(stepped, u.log_scale + lens.step_log_gain)


def propagate_stack(theta, lens):
    """
    Every BPM depth slice from the lens plane to the focal plane.

    Args:
        theta (float): Angle of arrival in radians
        lens (LensSpec): Lens geometry

    Returns:
        numpy.ndarray: (n_f + 1) x N_s complex slices u_0 ... u_{n_f}
    """
    _check_angle(theta)
    transfer = transfer_function(lens)
    slices = np.empty((lens.num_steps + 1, lens.num_samples), dtype=complex)
    slices[0] = _input_samples([theta], lens)[0]
    for n in range(1, lens.num_steps + 1):
        slices[n] = _step_samples(slices[n - 1], lens, transfer)
    return slices


def focal_fields(thetas, lens):
    """
    Batched focal-plane fields, one row per angle.

    Args:
        thetas (array-like): Angles of arrival in radians
        lens (LensSpec): Lens geometry

    Returns:
        numpy.ndarray: K x N_s complex focal fields
    """
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    for theta in thetas:
        _check_angle(float(theta))
    transfer = transfer_function(lens)
    samples = _input_samples(thetas, lens)
    for _ in range(lens.num_steps):
        samples = _step_samples(samples, lens, transfer)
    logger.debug("Propagated %d angle(s) over %d BPM steps", len(thetas), lens.num_steps)
    return samples


def propagate_to_focal(theta, lens):
    """
    Propagate the lens-plane field n_f = round(f / dz) steps to the focal plane.

    Args:
        theta (float): Angle of arrival in radians
        lens (LensSpec): Lens geometry

    Returns:
        ComplexField: u_f with the accumulated log_scale
    """
    _check_angle(theta)
    samples = focal_fields([theta], lens)[0]
    return ComplexField(samples, lens.num_steps * lens.step_log_gain)


def cell_indices(lens, arr):
    """
    BPM sample index of every vapor cell, p(m) = round(x_m/dx + (N_s+1)/2).

    Rounding is half-up, so the default 64-cell array sits at p(1) = 35 ... p(64) = 287.

    Returns:
        numpy.ndarray: 1-based indices, length M

    Raises:
        GeometryError: If any index falls outside 1..N_s
    """
    indices = _round_half_up(arr.positions() / lens.sample_spacing + (lens.num_samples + 1) / 2.0)
    if indices.min() < 1 or indices.max() > lens.num_samples:
        raise GeometryError(
            f"array of {arr.num_cells} cells at spacing {arr.spacing:.4g} m does not fit "
            f"the {lens.num_samples}-sample aperture (indices {indices.min()}..{indices.max()})"
        )
    return indices


def sample_at_cells(u_f, lens, arr):
    """
    Lens-embedded array response a_lens = [u_f(p(1)) ... u_f(p(M))].

    Args:
        u_f (ComplexField or numpy.ndarray): Focal field(s), last axis N_s
        lens (LensSpec): Lens geometry
        arr (ArraySpec): Vapor-cell array

    Returns:
        numpy.ndarray: Complex samples at the cells, last axis M
    """
    samples = u_f.samples if isinstance(u_f, ComplexField) else np.asarray(u_f)
    return samples[..., cell_indices(lens, arr) - 1]


def cell_responses(thetas, lens, arr):
    """a_lens for several angles, shape (K, M)."""
    return sample_at_cells(focal_fields(thetas, lens), lens, arr)


def cell_response(theta, lens, arr):
    """a_lens(theta), length M."""
    return cell_responses([theta], lens, arr)[0]


@dataclass(frozen=True)
class ReceiverSpec:
    """Lens, vapor-cell array and dipole: everything an atom depends on."""

    lens: LensSpec
    array: ArraySpec
    dipole: DipoleSpec

    @classmethod
    def default(cls):
        """The shipped 5 GHz, 64-cell receiver."""
        lens = LensSpec.from_wavelengths()
        array = ArraySpec(Config.NUM_CELLS, Config.CELL_SPACING_WAVELENGTHS * lens.wavelength)
        return cls(lens, array, DipoleSpec())

    def with_array(self, array):
        return ReceiverSpec(self.lens, array, self.dipole)

    def to_dict(self):
        return {
            "lens": self.lens.to_dict(),
            "array": self.array.to_dict(),
            "dipole": self.dipole.to_dict(),
        }

    def fingerprint(self):
        """SHA-256 of the canonical JSON encoding, used as the dictionary cache key."""
        encoded = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(encoded.encode("utf-8")).hexdigest()
