"""
Power-profile dictionary.
Builds the AoA grid, the nonnegative atoms p_Q(theta), their centered
versions and the Lipschitz constant used by the FISTA step.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from core.atomic import polarization_gain
from core.errors import DictionaryError, GeometryError
from core.optics import ReceiverSpec, cell_responses
from utils.config import Config

logger = logging.getLogger(__name__)

_DEGENERATE_GAIN_REL = 1e-12


@dataclass(frozen=True, eq=False)
class AoaGrid:
    """Uniform grid of candidate angles of arrival (radians)."""

    angles: np.ndarray
    spacing: float

    def __post_init__(self):
        angles = np.asarray(self.angles, dtype=float)
        if angles.ndim != 1 or angles.size < 2:
            raise GeometryError("an AoA grid needs at least two points")
        steps = np.diff(angles)
        if np.any(steps <= 0):
            raise GeometryError("grid angles must be strictly increasing")
        if np.max(np.abs(steps - self.spacing)) > 1e-12:
            raise GeometryError("grid angles must be uniformly spaced")
        if angles[0] <= -math.pi / 2 or angles[-1] >= math.pi / 2:
            raise GeometryError("grid must lie inside (-pi/2, pi/2)")
        angles.setflags(write=False)
        object.__setattr__(self, "angles", angles)

    def __len__(self):
        return int(self.angles.size)

    @property
    def min(self):
        return float(self.angles[0])

    @property
    def max(self):
        return float(self.angles[-1])

    def nearest_index(self, theta):
        """Index of the grid point closest to theta (clipped to the grid)."""
        index = int(round((theta - self.min) / self.spacing))
        return min(max(index, 0), len(self) - 1)

    def contains(self, lo, hi):
        """True when [lo, hi] lies inside the grid range (within a tiny tolerance)."""
        slack = 1e-9 * self.spacing
        return lo >= self.min - slack and hi <= self.max + slack

    def matches(self, other):
        """True when other has the same point count, start and step (to round-off)."""
        slack = 1e-9 * self.spacing
        return (len(self) == len(other) and abs(self.min - other.min) <= slack
                and abs(self.spacing - other.spacing) <= slack)

    def to_dict(self):
        return {"min": self.min, "max": self.max, "spacing": float(self.spacing)}


@dataclass(frozen=True, eq=False)
class PowerDictionary:
    """
    Atoms of the power-profile dictionary and their centered versions.

    Attributes:
        atoms (numpy.ndarray): M x d_QP nonnegative atoms p_Q(theta_i)
        centered (numpy.ndarray): M x d_QP centered atoms
        grid (AoaGrid): Angles indexing the columns
        lipschitz (float): Step constant L for FISTA
        spectral_norm_sq (float): Power-iteration estimate of ||P_perp||_2^2
        fingerprint (str): Receiver fingerprint the atoms were built for
    """

    atoms: np.ndarray
    centered: np.ndarray
    grid: AoaGrid
    lipschitz: float
    spectral_norm_sq: float
    fingerprint: str = ""
    column_norms: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        for name in ("atoms", "centered"):
            values = np.asarray(getattr(self, name), dtype=float)
            values.setflags(write=False)
            object.__setattr__(self, name, values)
        norms = np.linalg.norm(self.centered, axis=0)
        norms.setflags(write=False)
        object.__setattr__(self, "column_norms", norms)

    @property
    def num_cells(self):
        return int(self.atoms.shape[0])

    @property
    def num_angles(self):
        return int(self.atoms.shape[1])

    @classmethod
    def from_atoms(cls, atoms, grid, fingerprint="", tol=Config.LIPSCHITZ_TOL,
                   max_iter=Config.LIPSCHITZ_MAX_ITER):
        """
        Center raw atoms and estimate the Lipschitz constant.

        Args:
            atoms (numpy.ndarray): M x d_QP nonnegative atoms
            grid (AoaGrid): Column angles
            fingerprint (str): Receiver fingerprint
            tol (float): Power-iteration relative tolerance
            max_iter (int): Power-iteration cap

        Returns:
            PowerDictionary: The finished dictionary
        """
        atoms = np.asarray(atoms, dtype=float)
        if atoms.ndim != 2 or atoms.shape[1] != len(grid):
            raise DictionaryError(
                f"atoms shape {atoms.shape} does not match a grid of {len(grid)} angles"
            )
        if np.any(atoms < 0):
            raise DictionaryError("power atoms must be nonnegative")
        centered = center(atoms)
        norm_sq = power_iteration(centered, tol=tol, max_iter=max_iter)
        return cls(atoms, centered, grid, Config.LIPSCHITZ_SAFETY * norm_sq, norm_sq, fingerprint)

    def get_summary(self):
        """Short description for logs and the CLI."""
        return (
            f"{self.num_cells} cells x {self.num_angles} angles "
            f"[{math.degrees(self.grid.min):.2f} deg, {math.degrees(self.grid.max):.2f} deg] "
            f"step {math.degrees(self.grid.spacing):.4g} deg, L={self.lipschitz:.6g}"
        )


def build_grid(min_angle, max_angle, spacing):
    """
    Uniform AoA grid from min_angle stepping by spacing.

    Both endpoints are included when (max - min) / spacing is integral.

    Args:
        min_angle (float): Lower end in radians
        max_angle (float): Upper end in radians
        spacing (float): Grid step in radians

    Returns:
        AoaGrid: The grid

    Raises:
        GeometryError: For an empty or single-point grid
    """
    if not (math.isfinite(min_angle) and math.isfinite(max_angle) and math.isfinite(spacing)):
        raise GeometryError("grid bounds and spacing must be finite")
    if spacing <= 0:
        raise GeometryError(f"grid spacing must be positive, got {spacing}")
    if not min_angle < max_angle:
        raise GeometryError("grid minimum must be below its maximum")

    steps = (max_angle - min_angle) / spacing
    if abs(steps - round(steps)) <= 1e-9 * max(1.0, steps):
        count = int(round(steps)) + 1
    else:
        count = int(math.floor(steps)) + 1
    if count < 2:
        raise GeometryError(
            f"spacing {spacing:.4g} rad leaves fewer than two points in [{min_angle}, {max_angle}]"
        )
    return AoaGrid(min_angle + spacing * np.arange(count), spacing)


def build_grid_degrees(min_deg=Config.GRID_MIN_DEG, max_deg=Config.GRID_MAX_DEG,
                       spacing_deg=Config.GRID_SPACING_DEG):
    """build_grid with arguments in degrees."""
    return build_grid(math.radians(min_deg), math.radians(max_deg), math.radians(spacing_deg))


def power_atoms(thetas, receiver):
    """
    Atoms p_Q(theta) = eta(theta) |a_lens(theta)|^2 for several angles.

    Args:
        thetas (array-like): Angles in radians
        receiver (ReceiverSpec): Lens, array and dipole

    Returns:
        numpy.ndarray: M x K nonnegative matrix, one column per angle
    """
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    responses = cell_responses(thetas, receiver.lens, receiver.array)
    gains = np.array([polarization_gain(float(t), receiver.dipole) for t in thetas])
    return (gains[:, None] * np.abs(responses) ** 2).T


def build_atom(theta, lens, arr, dipole):
    """
    Single power atom p_Q(theta).

    Args:
        theta (float): Angle in radians
        lens (LensSpec): Lens geometry
        arr (ArraySpec): Vapor-cell array
        dipole (DipoleSpec): Transition dipole

    Returns:
        numpy.ndarray: Nonnegative M-vector
    """
    response = cell_responses([theta], lens, arr)[0]
    return polarization_gain(theta, dipole) * np.abs(response) ** 2


def center(v):
    """
    Centering projector: v - mean(v), applied along the cell axis.

    Works on an M-vector or column-wise on an M x K matrix.
    """
    v = np.asarray(v, dtype=float)
    return v - v.mean(axis=0)


def power_iteration(centered, tol=Config.LIPSCHITZ_TOL, max_iter=Config.LIPSCHITZ_MAX_ITER, seed=0):
    """
    Largest eigenvalue of P^T P by power iteration.

    Iterates x <- P^T P x / ||P^T P x|| from a seeded Gaussian start until the
    relative change of ||P^T P x|| drops below tol.

    Args:
        centered (numpy.ndarray): M x d matrix P
        tol (float): Relative tolerance on the eigenvalue estimate
        max_iter (int): Iteration cap
        seed (int): Start-vector seed

    Returns:
        float: Estimate of ||P||_2^2
    """
    matrix = np.asarray(centered, dtype=float)
    x = np.random.default_rng(seed).standard_normal(matrix.shape[1])
    x /= np.linalg.norm(x)
    value = 0.0
    previous = None
    for it in range(max_iter):
        x = matrix.T @ (matrix @ x)
        value = float(np.linalg.norm(x))
        if value == 0.0:
            return 0.0
        if previous is not None and abs(value - previous) <= tol * previous:
            logger.debug("Power iteration converged after %d iterations", it + 1)
            break
        previous = value
        x /= value
    else:
        logger.warning("Power iteration hit max_iter=%d before reaching tol=%g", max_iter, tol)
    return value


def cosine_similarity_matrix(centered):
    """Pairwise cosine similarities between centered atoms (d x d)."""
    centered = np.asarray(centered, dtype=float)
    norms = np.linalg.norm(centered, axis=0)
    norms = np.where(norms > 0, norms, 1.0)
    unit = centered / norms
    return unit.T @ unit


def build_dictionary(grid, lens, arr, dipole, workers=1, chunk_size=64):
    """
    Offline construction of the power dictionary.

    Columns are independent BPM runs; with workers > 1 they are computed in
    chunks on a thread pool.

    Args:
        grid (AoaGrid): Candidate angles
        lens (LensSpec): Lens geometry
        arr (ArraySpec): Vapor-cell array
        dipole (DipoleSpec): Transition dipole
        workers (int): Thread-pool size
        chunk_size (int): Angles per BPM batch

    Returns:
        PowerDictionary: Atoms, centered atoms and Lipschitz constant

    Raises:
        DictionaryError: If any atom is the zero vector
    """
    receiver = ReceiverSpec(lens, arr, dipole)
    gains = np.array([polarization_gain(float(t), dipole) for t in grid.angles])
    degenerate = np.flatnonzero(gains <= _DEGENERATE_GAIN_REL * dipole.norm_sq)
    if degenerate.size:
        raise DictionaryError(
            f"dipole is parallel to the propagation direction at "
            f"{np.degrees(grid.angles[degenerate[0]]):.3f} deg; atom would be zero"
        )

    chunks = [grid.angles[i:i + chunk_size] for i in range(0, len(grid), chunk_size)]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            columns = list(pool.map(lambda c: power_atoms(c, receiver), chunks))
    else:
        columns = [power_atoms(c, receiver) for c in chunks]
    atoms = np.hstack(columns)

    if np.any(np.max(atoms, axis=0) <= 0):
        raise DictionaryError("a dictionary atom vanished at every vapor cell")

    dictionary = PowerDictionary.from_atoms(atoms, grid, fingerprint=receiver.fingerprint())
    logger.info("Built power dictionary: %s", dictionary.get_summary())
    return dictionary


def build_receiver_dictionary(receiver, grid, workers=1):
    """build_dictionary for a ReceiverSpec."""
    return build_dictionary(grid, receiver.lens, receiver.array, receiver.dipole, workers=workers)
