import itertools

import numpy as np
import pytest

from core.dictionary import PowerDictionary, build_grid, center
from core.errors import DegenerateResidualError, DictionaryError
from core.measurement import UserConfig, default_lo, expected_profile
from core.solver_sic import best_atom, nn_amplitude, sic_solve


@pytest.fixture
def toy(rng):
    return PowerDictionary.from_atoms(rng.uniform(size=(8, 10)), build_grid(0.0, 0.9, 0.1))


def brute_force_best(centered, r, excluded):
    scores = {
        j: centered[:, j] @ r / (np.linalg.norm(centered[:, j]) * np.linalg.norm(r))
        for j in range(centered.shape[1]) if j not in excluded
    }
    return max(scores, key=lambda j: (scores[j], -j))


def test_best_atom_matches_exhaustive_scan(toy, rng):
    for _ in range(20):
        r = center(rng.normal(size=8))
        excluded = set(rng.choice(10, size=3, replace=False).tolist())
        assert best_atom(toy.centered, r, excluded) == brute_force_best(toy.centered, r, excluded)


def test_best_atom_skips_excluded_match(toy):
    r = toy.centered[:, 4]
    assert best_atom(toy.centered, r) == 4
    assert best_atom(toy.centered, r, excluded=[4]) == brute_force_best(toy.centered, r, {4})


def test_best_atom_rejects_degenerate_input(toy):
    with pytest.raises(DegenerateResidualError):
        best_atom(toy.centered, np.zeros(8))
    with pytest.raises(ValueError):
        best_atom(toy.centered, toy.centered[:, 0], excluded=range(10))


def test_nn_amplitude():
    p = np.array([1.0, -1.0, 0.0])
    assert nn_amplitude(p, 3 * p) == pytest.approx(3.0)
    assert nn_amplitude(p, -p) == 0.0
    with pytest.raises(DictionaryError):
        nn_amplitude(np.zeros(3), p)


def test_residual_never_grows_and_is_orthogonal(toy, rng):
    y = toy.centered @ np.abs(rng.normal(size=10))
    result = sic_solve(toy, y, 4)
    trace = result.residual_energy_trace
    assert trace.size == 5
    assert np.all(np.diff(trace) <= 1e-12 * trace[0])
    assert np.all(result.amplitudes >= 0)

    residual = y.copy()
    for index, amplitude in zip(result.indices, result.amplitudes):
        atom = toy.centered[:, index]
        residual = residual - amplitude * atom
        if amplitude > 0:
            assert abs(atom @ residual) <= 1e-9 * np.linalg.norm(atom) * np.linalg.norm(y)


def test_early_exhaustion(toy):
    result = sic_solve(toy, 2.0 * toy.centered[:, 3], 3)
    assert result.indices[0] == 3
    assert result.amplitudes[0] == pytest.approx(2.0)
    assert result.early_exhaustion
    assert np.all(result.amplitudes[1:] == 0.0)
    assert len(set(result.indices.tolist())) == 3


def test_zero_profile_exhausts_immediately(toy):
    result = sic_solve(toy, np.zeros(8), 2)
    assert result.early_exhaustion
    assert result.indices.size == 2
    assert np.all(result.amplitudes == 0.0)


def test_too_many_users_rejected(toy):
    with pytest.raises(ValueError):
        sic_solve(toy, toy.centered[:, 0], 11)


def test_two_atom_recovery_matches_least_squares_oracle(dictionary):
    i, j = 100, 180
    y = 2.0 * dictionary.centered[:, i] + dictionary.centered[:, j]
    result = sic_solve(dictionary, y, 2)
    assert sorted(result.indices.tolist()) == [i, j]

    # exhaustive two-atom nonnegative least squares over a window of pairs
    best, best_error = None, np.inf
    for a, b in itertools.combinations(range(90, 191), 2):
        atoms = dictionary.centered[:, [a, b]]
        coef, *_ = np.linalg.lstsq(atoms, y, rcond=None)
        if np.any(coef < 0):
            continue
        error = np.linalg.norm(y - atoms @ coef)
        if error < best_error:
            best, best_error = (a, b), error
    assert best == (i, j)


def test_noiseless_three_users_on_grid(dictionary, receiver, snap_to_grid):
    truth = snap_to_grid((-8, 3, 10))
    users = UserConfig.equal_power(truth)
    y = center(expected_profile(users, default_lo(users), receiver, 0.0))
    result = sic_solve(dictionary, y, 3)
    assert np.allclose(result.angles, truth, rtol=0, atol=1e-12)
    assert not result.early_exhaustion
    assert result.residual_energy_trace[-1] <= 0.05 * result.residual_energy_trace[0]


@pytest.mark.parametrize("scale", [1e-3, 1.0, 1e6])
def test_picks_ignore_profile_scale(dictionary, receiver, snap_to_grid, scale):
    truth = snap_to_grid((-8, 3, 10))
    users = UserConfig.equal_power(truth)
    y = center(expected_profile(users, default_lo(users), receiver, 0.0))
    base = sic_solve(dictionary, y, 3)
    scaled = sic_solve(dictionary, scale * y, 3)
    assert scaled.indices.tolist() == base.indices.tolist()
    assert np.allclose(scaled.amplitudes, scale * base.amplitudes)
    assert scaled.early_exhaustion == base.early_exhaustion
