import math

import numpy as np
import pytest

from core.errors import GeometryError
from core.optics import (
    ArraySpec,
    ComplexField,
    LensSpec,
    ReceiverSpec,
    cell_indices,
    cell_response,
    focal_fields,
    fresnel_step,
    lens_input_field,
    propagate_stack,
    propagate_to_focal,
    sample_at_cells,
    transfer_function,
)

LENS = LensSpec.from_wavelengths()
ARRAY = ArraySpec(64, 0.5 * LENS.wavelength)


def fresnel_integral(theta, lens):
    """Single-shot Fresnel integral from the lens plane to z = f by direct summation."""
    x = lens.coordinates()
    u0 = lens_input_field(theta, lens).samples
    kernel = np.exp(1j * lens.wavenumber * (x[:, None] - x[None, :]) ** 2 / (2.0 * lens.focal_length))
    return kernel @ u0


def gaussian_after(x, w0, z, wavelength):
    """Paraxial propagation of exp(-x^2/w0^2) over z (e^{jkz} dropped)."""
    a = math.pi * w0 ** 2 + 1j * wavelength * z
    return w0 * math.sqrt(math.pi) / np.sqrt(a) * np.exp(-math.pi * x ** 2 / a)


def relative_l2(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_default_lens_geometry():
    assert LENS.num_samples == 320
    assert LENS.num_steps == 52
    assert LENS.padded_size == 640
    assert LENS.window_start == 160
    assert LENS.wavelength == pytest.approx(0.05995849, rel=1e-6)
    x = LENS.coordinates()
    assert x[0] == pytest.approx(-x[-1])
    assert np.allclose(np.diff(x), LENS.sample_spacing)


def test_from_curvature_uses_thin_lens_focal_length():
    lam = LENS.wavelength
    lens = LensSpec.from_curvature(lam, 40 * lam, 52 * lam, 4.0, lam / 8, lam)
    assert lens.focal_length == pytest.approx(52 * lam)
    with pytest.raises(GeometryError):
        LensSpec.from_curvature(lam, 40 * lam, 52 * lam, 1.0, lam / 8, lam)


@pytest.mark.parametrize("changes", [
    {"aperture_width": 40.05},
    {"sample_spacing": 1.2},
    {"focal_length": -1.0},
    {"step": 200.0},
    {"pad_factor": 0},
])
def test_invalid_lens_rejected(changes):
    lam = LENS.wavelength
    params = {
        "wavelength": lam,
        "aperture_width": 40 * lam,
        "focal_length": 52 * lam,
        "sample_spacing": lam / 8,
        "step": lam,
        "pad_factor": 2,
    }
    for key, value in changes.items():
        params[key] = value if key == "pad_factor" else value * lam
    with pytest.raises(GeometryError):
        LensSpec(**params)


def test_input_field_has_unit_magnitude():
    u = lens_input_field(math.radians(7), LENS)
    assert u.samples.shape == (320,)
    assert np.allclose(np.abs(u.samples), 1.0)
    assert u.log_scale == 0.0


@pytest.mark.parametrize("theta", [math.pi / 2, -math.pi / 2, math.nan])
def test_grazing_angles_rejected(theta):
    with pytest.raises(GeometryError):
        lens_input_field(theta, LENS)


def test_transfer_function_is_unimodular_and_even():
    h = transfer_function(LENS)
    assert h.shape == (640,)
    assert np.allclose(np.abs(h), 1.0)
    assert np.allclose(h[1:], h[1:][::-1])


def test_impulse_step_matches_direct_chirp_kernel():
    n = LENS.num_samples
    npad = LENS.padded_size
    impulse = np.zeros(n, dtype=complex)
    impulse[n // 2] = 1.0
    out = fresnel_step(ComplexField(impulse), LENS)

    q = np.arange(npad)
    kernel = np.exp(2j * np.pi * np.outer(q, q) / npad) @ transfer_function(LENS) / npad
    shift = LENS.window_start + n // 2
    expected = kernel[(LENS.window_start + np.arange(n) - shift) % npad]
    assert relative_l2(np.abs(out.samples), np.abs(expected)) < 1e-9


def test_gaussian_beam_matches_paraxial_solution():
    lam = LENS.wavelength
    x = LENS.coordinates()
    w0 = 2 * lam
    u = ComplexField(np.exp(-x ** 2 / w0 ** 2).astype(complex))
    for _ in range(10):
        u = fresnel_step(u, LENS)
    expected = gaussian_after(x, w0, 10 * LENS.step, lam)
    assert relative_l2(u.samples, expected) < 1e-6
    assert u.log_scale == pytest.approx(10 * LENS.step_log_gain)


def test_step_conserves_energy_of_contained_field():
    x = LENS.coordinates()
    u = ComplexField(np.exp(-x ** 2 / (2 * LENS.wavelength) ** 2).astype(complex))
    out = fresnel_step(u, LENS)
    assert np.sum(out.intensity()) == pytest.approx(np.sum(u.intensity()), rel=1e-8)


def test_step_never_gains_energy():
    u = lens_input_field(math.radians(12), LENS)
    out = fresnel_step(u, LENS)
    assert np.sum(out.intensity()) <= np.sum(u.intensity()) * (1 + 1e-12)


def test_zero_field_stays_zero():
    out = fresnel_step(ComplexField(np.zeros(320, dtype=complex), 1.5), LENS)
    assert not np.any(out.samples)
    assert out.log_scale == pytest.approx(1.5 + LENS.step_log_gain)
    assert not np.any(out.normalized_magnitude())


def test_step_rejects_wrong_length():
    with pytest.raises(GeometryError):
        fresnel_step(ComplexField(np.ones(100, dtype=complex)), LENS)


def test_broadside_focus_is_centered_and_even():
    u_f = propagate_to_focal(0.0, LENS)
    magnitude = np.abs(u_f.samples)
    assert int(np.argmax(magnitude)) in (159, 160)
    assert np.allclose(magnitude, magnitude[::-1], rtol=1e-6, atol=1e-6 * magnitude.max())
    assert u_f.log_scale == pytest.approx(52 * LENS.step_log_gain)


@pytest.mark.parametrize("degrees", [-10, -5, 0, 5, 10])
def test_focal_peak_location(degrees):
    theta = math.radians(degrees)
    magnitude = np.abs(propagate_to_focal(theta, LENS).samples)
    x_peak = LENS.coordinates()[np.argmax(magnitude)]
    assert abs(x_peak + LENS.focal_length * math.sin(theta)) <= LENS.sample_spacing


@pytest.mark.parametrize("degrees", [-10, -5, 0, 5, 10])
def test_bpm_matches_direct_fresnel_integral(degrees):
    theta = math.radians(degrees)
    bpm = propagate_to_focal(theta, LENS).normalized_magnitude()
    direct = np.abs(fresnel_integral(theta, LENS))
    assert relative_l2(bpm, direct / direct.max()) < 0.02


def test_mirrored_angles_give_mirrored_fields():
    theta = math.radians(6.3)
    plus, minus = focal_fields([theta, -theta], LENS)
    assert np.allclose(np.abs(plus), np.abs(minus)[::-1], rtol=1e-9, atol=1e-9 * np.abs(plus).max())


def test_stack_ends_at_focal_field():
    theta = math.radians(4)
    stack = propagate_stack(theta, LENS)
    assert stack.shape == (53, 320)
    assert np.allclose(stack[0], lens_input_field(theta, LENS).samples)
    assert np.allclose(stack[-1], propagate_to_focal(theta, LENS).samples)


def test_cell_indices_default_array():
    p = cell_indices(LENS, ARRAY)
    assert p[0] == 35
    assert p[-1] == 287
    assert np.all(np.diff(p) == 4)
    assert np.all(p[::-1] + p == LENS.num_samples + 2)


def test_oversized_array_rejected():
    wide = ArraySpec(200, 0.5 * LENS.wavelength)
    assert not wide.fits(LENS)
    with pytest.raises(GeometryError):
        cell_indices(LENS, wide)


@pytest.mark.parametrize("num_cells,spacing", [(0, 1.0), (4, 0.0), (2.5, 1.0)])
def test_invalid_array_rejected(num_cells, spacing):
    with pytest.raises(GeometryError):
        ArraySpec(num_cells, spacing)


def test_sampling_picks_cell_samples():
    u_f = propagate_to_focal(0.0, LENS)
    samples = sample_at_cells(u_f, LENS, ARRAY)
    assert samples.shape == (64,)
    assert np.array_equal(samples, u_f.samples[cell_indices(LENS, ARRAY) - 1])
    power = np.abs(samples) ** 2
    assert int(np.argmax(power)) in (31, 32)


def test_pad_factor_barely_changes_response():
    theta = math.radians(5)
    wider = LensSpec(LENS.wavelength, LENS.aperture_width, LENS.focal_length,
                     LENS.sample_spacing, LENS.step, pad_factor=4)
    base = np.abs(cell_response(theta, LENS, ARRAY)) ** 2
    padded = np.abs(cell_response(theta, wider, ARRAY)) ** 2
    assert relative_l2(padded, base) < 0.01


def test_receiver_fingerprint():
    receiver = ReceiverSpec.default()
    assert receiver.fingerprint() == ReceiverSpec.default().fingerprint()
    other = receiver.with_array(ArraySpec(32, receiver.array.spacing))
    assert other.fingerprint() != receiver.fingerprint()
    assert set(receiver.to_dict()) == {"lens", "array", "dipole"}


def test_focal_peak_moves_monotonically_with_angle():
    peaks = [LENS.coordinates()[np.argmax(np.abs(propagate_to_focal(math.radians(d), LENS).samples))]
             for d in np.linspace(-15, 15, 13)]
    assert np.all(np.diff(peaks) < 0), peaks


@pytest.mark.parametrize("degrees", [-10, -5, 0, 5, 10])
def test_doubling_pad_factor_keeps_focal_magnitude(degrees):
    theta = math.radians(degrees)
    doubled = LensSpec(LENS.wavelength, LENS.aperture_width, LENS.focal_length,
                       LENS.sample_spacing, LENS.step, pad_factor=2 * LENS.pad_factor)
    base = propagate_to_focal(theta, LENS).normalized_magnitude()
    wider = propagate_to_focal(theta, doubled).normalized_magnitude()
    assert relative_l2(wider, base) < 0.005
