"""
SIC angle estimation.
Greedy pick-fit-subtract loop: select the centered atom most similar to the
residual, fit its nonnegative amplitude, cancel it, repeat K_U times.
"""

import logging
from dataclasses import dataclass

import numpy as np

from core.errors import DegenerateResidualError, DictionaryError
from utils.config import Config

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SicResult:
    """
    Output of sic_solve.

    Attributes:
        angles (numpy.ndarray): Grid angles of the picks, sorted ascending
        indices (numpy.ndarray): Chosen grid indices in pick order
        amplitudes (numpy.ndarray): Nonnegative amplitudes in pick order
        residual_energy_trace (numpy.ndarray): ||r||^2 before the first pick
            and after every pick (K_U + 1 entries)
        early_exhaustion (bool): The residual vanished before K_U picks
    """

    angles: np.ndarray
    indices: np.ndarray
    amplitudes: np.ndarray
    residual_energy_trace: np.ndarray
    early_exhaustion: bool


def _similarity_scores(centered, r, column_norms, excluded):
    norms = column_norms if column_norms is not None else np.linalg.norm(centered, axis=0)
    r_norm = float(np.linalg.norm(r))
    scores = np.full(centered.shape[1], -np.inf)
    valid = norms > 0
    if r_norm > 0:
        scores[valid] = (centered[:, valid].T @ r) / (norms[valid] * r_norm)
    else:
        scores[valid] = 0.0
    if excluded:
        scores[list(excluded)] = -np.inf
    return scores


def best_atom(centered, r, excluded=(), column_norms=None):
    """
    Index of the atom with the largest cosine similarity to r.

    The score keeps its sign; ties go to the lower index.

    Args:
        centered (numpy.ndarray): M x d centered atoms
        r (numpy.ndarray): Residual
        excluded (iterable): Indices that may not be picked
        column_norms (numpy.ndarray, optional): Precomputed atom norms

    Returns:
        int: Chosen index

    Raises:
        DegenerateResidualError: If r is the zero vector
    """
    centered = np.asarray(centered, dtype=float)
    r = np.asarray(r, dtype=float)
    excluded = set(int(i) for i in excluded)
    if len(excluded) >= centered.shape[1]:
        raise ValueError("every atom is excluded")
    if not np.linalg.norm(r) > 0:
        raise DegenerateResidualError("residual is the zero vector")
    scores = _similarity_scores(centered, r, column_norms, excluded)
    return int(np.argmax(scores))


def nn_amplitude(p, r):
    """
    Nonnegative one-dimensional least-squares fit max(p.r / ||p||^2, 0).

    Raises:
        DictionaryError: If p is the zero vector
    """
    p = np.asarray(p, dtype=float)
    energy = float(p @ p)
    if not energy > 0:
        raise DictionaryError("cannot fit the amplitude of a zero atom")
    return max(float(p @ np.asarray(r, dtype=float)) / energy, 0.0)


def sic_solve(dictionary, y_centered, num_users, exhaustion_rel=Config.SIC_EXHAUSTION_REL):
    """
    Successive interference cancellation over the centered dictionary.

    Each stage picks the best remaining atom, fits its amplitude and removes
    it from the residual. If the residual collapses below
    exhaustion_rel * ||y||, the remaining picks rank the unchosen atoms by
    their similarity to the original profile and get zero amplitude.

    Args:
        dictionary (PowerDictionary): Centered atoms and grid
        y_centered (numpy.ndarray): Centered power profile
        num_users (int): K_U picks to make
        exhaustion_rel (float): Relative residual-exhaustion threshold

    Returns:
        SicResult: Picks, amplitudes and the residual-energy trace
    """
    centered = dictionary.centered
    norms = dictionary.column_norms
    if num_users > dictionary.num_angles:
        raise ValueError(f"cannot pick {num_users} atoms from {dictionary.num_angles}")

    y = np.asarray(y_centered, dtype=float)
    y_norm = float(np.linalg.norm(y))
    residual = y.copy()
    trace = [float(residual @ residual)]
    chosen = []
    amplitudes = []
    exhausted = False

    for stage in range(num_users):
        r_norm = float(np.linalg.norm(residual))
        if not exhausted and (r_norm == 0.0 or r_norm < exhaustion_rel * y_norm):
            exhausted = True
            logger.debug("SIC residual exhausted after %d of %d picks", stage, num_users)

        if exhausted:
            scores = _similarity_scores(centered, y, norms, set(chosen))
            index = int(np.argmax(scores))
            amplitude = 0.0
        else:
            index = best_atom(centered, residual, chosen, norms)
            amplitude = nn_amplitude(centered[:, index], residual)
            residual = residual - amplitude * centered[:, index]

        chosen.append(index)
        amplitudes.append(amplitude)
        trace.append(float(residual @ residual))

    indices = np.asarray(chosen, dtype=int)
    return SicResult(
        angles=np.sort(dictionary.grid.angles[indices]),
        indices=indices,
        amplitudes=np.asarray(amplitudes, dtype=float),
        residual_energy_trace=np.asarray(trace),
        early_exhaustion=exhausted,
    )
