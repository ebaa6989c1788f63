"""
NN-LASSO angle estimation.
FISTA solve of the nonnegative l1-regularized least-squares problem over the
centered dictionary, followed by support detection, clustering of adjacent
grid bins, centroid decoding, merged-cluster splitting and top-K selection.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from core.dictionary import power_iteration
from utils.config import Config

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FistaConfig:
    """
    Solver settings.

    lambda_reg and tol default to data-scaled values when left as None:
    lambda_reg = lambda_scale * ||P^T y||_inf and tol = tol_scale * max(1, ||y||).
    """

    lambda_reg: float = None
    tol: float = None
    max_iter: int = Config.FISTA_MAX_ITER
    support_tau_rel: float = Config.SUPPORT_TAU_REL
    cluster_mass_rel: float = Config.CLUSTER_MASS_REL
    merge_mass_ratio: float = Config.MERGE_MASS_RATIO
    lambda_scale: float = Config.LAMBDA_SCALE
    tol_scale: float = Config.FISTA_TOL_SCALE

    def __post_init__(self):
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError(f"max_iter must be an integer >= 1, got {self.max_iter}")
        if self.lambda_reg is not None and self.lambda_reg < 0:
            raise ValueError("lambda_reg must be nonnegative")
        if self.tol is not None and not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.support_tau_rel < 1:
            raise ValueError("support_tau_rel must lie in (0, 1)")
        if not 0 <= self.cluster_mass_rel < 1:
            raise ValueError("cluster_mass_rel must lie in [0, 1)")
        if not self.merge_mass_ratio > 1:
            raise ValueError("merge_mass_ratio must exceed 1")

    def resolve_lambda(self, centered, y):
        if self.lambda_reg is not None:
            return float(self.lambda_reg)
        return default_lambda(centered, y, self.lambda_scale)

    def resolve_tol(self, y):
        if self.tol is not None:
            return float(self.tol)
        return self.tol_scale * max(1.0, float(np.linalg.norm(y)))


@dataclass(frozen=True, eq=False)
class FistaResult:
    """Final FISTA iterate with its traces (entry 0 is the w = 0 start)."""

    w: np.ndarray
    objective_trace: np.ndarray
    model_error_trace: np.ndarray
    iterations: int
    converged: bool
    lambda_reg: float
    lipschitz: float


@dataclass(frozen=True)
class Cluster:
    """Connected run of support indices with its mass and centroid angle."""

    indices: tuple
    mass: float
    centroid: float


@dataclass(frozen=True, eq=False)
class NnlassoResult:
    """
    Output of the full NN-LASSO pipeline.

    Attributes:
        w_hat (numpy.ndarray): Nonnegative coefficients over the grid
        support (numpy.ndarray): Indices above the support threshold
        clusters (list): Decoded Cluster objects (after any splitting)
        angles (numpy.ndarray): K_U estimates, sorted ascending
        objective_trace (numpy.ndarray): Objective per iteration
        model_error_trace (numpy.ndarray): ||y - P w||^2 per iteration
        iterations (int): FISTA iterations run
        converged (bool): False if max_iter was hit
        under_detected (bool): Fewer clusters than users were found
    """

    w_hat: np.ndarray
    support: np.ndarray
    clusters: list
    angles: np.ndarray
    objective_trace: np.ndarray
    model_error_trace: np.ndarray
    iterations: int
    converged: bool
    under_detected: bool
    lambda_reg: float = 0.0
    flags: dict = field(default_factory=dict)


def soft_threshold(x, tau):
    """sign(x) * max(|x| - tau, 0), elementwise."""
    x = np.asarray(x, dtype=float)
    result = np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)
    return float(result) if result.ndim == 0 else result


def next_momentum(t):
    """FISTA momentum update (1 + sqrt(1 + 4 t^2)) / 2."""
    return (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0


def default_lambda(centered, y, scale=Config.LAMBDA_SCALE):
    """Data-scaled regularization weight scale * ||P^T y||_inf."""
    correlations = np.asarray(centered).T @ np.asarray(y, dtype=float)
    return scale * float(np.max(np.abs(correlations))) if correlations.size else 0.0


def nnlasso_objective(centered, y, w, lambda_reg):
    """(1/2) ||y - P w||^2 + lambda ||w||_1."""
    residual = y - centered @ w
    return 0.5 * float(residual @ residual) + lambda_reg * float(np.sum(np.abs(w)))


def fista_solve(centered, y, cfg=None, lipschitz=None, callback=None, record_traces=True):
    """
    Accelerated proximal gradient for min_{w >= 0} (1/2)||y - P w||^2 + lambda ||w||_1.

    w(t+1) = [S_{lambda/L}(z(t) - P^T(P z(t) - y) / L)]_+
    z(t+1) = w(t+1) + (t_old - 1) / t_new * (w(t+1) - w(t))

    Starts from w = z = 0, t = 1 and stops once ||w(t+1) - w(t)|| <= tol or
    max_iter is reached.

    Args:
        centered (numpy.ndarray): M x d centered dictionary P
        y (numpy.ndarray): Centered power profile
        cfg (FistaConfig, optional): Solver settings
        lipschitz (float, optional): Step constant L; estimated by power
            iteration when omitted
        callback (callable, optional): Called as callback(iteration, w) after
            every update
        record_traces (bool): Keep objective and model-error traces

    Returns:
        FistaResult: Final iterate, traces and convergence flag
    """
    cfg = cfg or FistaConfig()
    centered = np.asarray(centered, dtype=float)
    y = np.asarray(y, dtype=float)
    if lipschitz is None:
        lipschitz = Config.LIPSCHITZ_SAFETY * power_iteration(centered)
    lambda_reg = cfg.resolve_lambda(centered, y)
    tol = cfg.resolve_tol(y)

    num_angles = centered.shape[1]
    w = np.zeros(num_angles)
    z = np.zeros(num_angles)
    t = 1.0
    if not lipschitz > 0:
        logger.warning("Dictionary has zero spectral norm; returning the zero solution")
        trace = np.array([0.5 * float(y @ y)])
        return FistaResult(w, trace, 2.0 * trace, 0, True, lambda_reg, float(lipschitz))

    step = 1.0 / lipschitz
    threshold = lambda_reg * step
    gram_y = centered.T @ y

    objectives = [0.5 * float(y @ y)] if record_traces else []
    model_errors = [float(y @ y)] if record_traces else []
    converged = False
    iterations = 0
    for iterations in range(1, cfg.max_iter + 1):
        gradient = centered.T @ (centered @ z) - gram_y
        w_next = np.maximum(z - step * gradient - threshold, 0.0)
        t_next = next_momentum(t)
        z = w_next + ((t - 1.0) / t_next) * (w_next - w)
        change = float(np.linalg.norm(w_next - w))
        w, t = w_next, t_next

        if callback is not None:
            callback(iterations, w)
        if record_traces:
            residual = y - centered @ w
            error = float(residual @ residual)
            model_errors.append(error)
            objectives.append(0.5 * error + lambda_reg * float(w.sum()))
        if change <= tol:
            converged = True
            break

    if not converged:
        logger.debug("FISTA stopped at max_iter=%d with iterate change above tol=%.3e",
                     cfg.max_iter, tol)
    return FistaResult(w, np.asarray(objectives), np.asarray(model_errors),
                       iterations, converged, lambda_reg, float(lipschitz))


def detect_support(w_hat, tau_rel=Config.SUPPORT_TAU_REL):
    """
    Support {i : w_i > tau_rel * max(w)}.

    Returns:
        tuple: (sorted index array, True if the support is empty)
    """
    w_hat = np.asarray(w_hat, dtype=float)
    peak = float(w_hat.max()) if w_hat.size else 0.0
    if not peak > 0:
        return np.array([], dtype=int), True
    support = np.flatnonzero(w_hat > tau_rel * peak)
    return support, support.size == 0


def cluster_support(support):
    """Split sorted support indices into maximal runs of adjacent grid bins."""
    support = np.asarray(support, dtype=int)
    if support.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(support) != 1) + 1
    return [run for run in np.split(support, breaks)]


def centroid_decode(clusters, w_hat, grid):
    """
    Mass and power-weighted centroid angle of each cluster.

    Clusters with zero mass are dropped with a warning.

    Returns:
        list: Cluster objects in input order
    """
    w_hat = np.asarray(w_hat, dtype=float)
    decoded = []
    for indices in clusters:
        indices = np.asarray(indices, dtype=int)
        weights = w_hat[indices]
        mass = float(weights.sum())
        if not mass > 0:
            logger.warning("Dropping zero-mass cluster at grid indices %s", indices.tolist())
            continue
        centroid = float(weights @ grid.angles[indices] / mass)
        decoded.append(Cluster(tuple(int(i) for i in indices), mass, centroid))
    return decoded


def _split_at_weighted_median(cluster, w_hat, grid):
    """Two halves of a cluster split after its weighted-median bin, or None."""
    indices = np.asarray(cluster.indices, dtype=int)
    if indices.size < 2:
        return None
    cumulative = np.cumsum(w_hat[indices])
    position = int(np.searchsorted(cumulative, 0.5 * cumulative[-1]))
    position = min(max(position + 1, 1), indices.size - 1)
    halves = centroid_decode([indices[:position], indices[position:]], w_hat, grid)
    return halves if len(halves) == 2 else None


def split_clusters(decoded, w_hat, grid, num_users):
    """
    Split the largest-mass clusters at their weighted medians until there
    are num_users clusters or nothing more can be split.

    Returns:
        list: Cluster objects
    """
    w_hat = np.asarray(w_hat, dtype=float)
    clusters = list(decoded)
    while len(clusters) < num_users:
        order = sorted(range(len(clusters)), key=lambda i: (-clusters[i].mass, clusters[i].indices[0]))
        for i in order:
            halves = _split_at_weighted_median(clusters[i], w_hat, grid)
            if halves is not None:
                clusters[i:i + 1] = halves
                break
        else:
            break
    return clusters


def prune_clusters(decoded, mass_rel=Config.CLUSTER_MASS_REL):
    """
    Separate detections from weak clusters.

    A detection holds at least mass_rel times the heaviest cluster mass; the
    rest are isolated bins left over from noise or an unconverged solve.

    Returns:
        tuple: (detections, weak), each in input order
    """
    if not decoded:
        return [], []
    floor = mass_rel * max(c.mass for c in decoded)
    detections = [c for c in decoded if c.mass >= floor]
    weak = [c for c in decoded if c.mass < floor]
    return detections, weak


def split_merged(decoded, w_hat, grid, num_users, mass_ratio=Config.MERGE_MASS_RATIO):
    """
    Split clusters that carry more than one user.

    Users closer than the lens resolution share one connected cluster. While
    the heaviest of the num_users top clusters holds at least mass_ratio
    times the median mass of the other top clusters, it is split at its
    weighted median.

    Returns:
        list: Cluster objects
    """
    w_hat = np.asarray(w_hat, dtype=float)
    clusters = list(decoded)
    for _ in range(num_users):
        if num_users < 2 or len(clusters) < 2:
            break
        ranked = sorted(range(len(clusters)), key=lambda i: (-clusters[i].mass, clusters[i].indices[0]))
        top = ranked[:num_users]
        heaviest = top[0]
        others = float(np.median([clusters[i].mass for i in top[1:]]))
        if clusters[heaviest].mass < mass_ratio * others:
            break
        halves = _split_at_weighted_median(clusters[heaviest], w_hat, grid)
        if halves is None:
            break
        logger.debug("Splitting merged cluster at grid indices %d..%d",
                     clusters[heaviest].indices[0], clusters[heaviest].indices[-1])
        clusters[heaviest:heaviest + 1] = halves
    return clusters


def select_topk(decoded, num_users, fill_angle=0.0):
    """
    Centroids of the num_users heaviest clusters, sorted ascending.

    Ties in mass go to the lower grid index. With fewer clusters than users the
    ranked centroids are repeated (fill_angle when there are none).

    Returns:
        tuple: (angle array, True if fewer clusters than users were found)
    """
    ranked = sorted(decoded, key=lambda c: (-c.mass, c.indices[0]))
    chosen = [c.centroid for c in ranked[:num_users]]
    under_detected = len(chosen) < num_users
    if under_detected:
        pool = chosen or [fill_angle]
        chosen = [pool[i % len(pool)] for i in range(num_users)]
    return np.sort(np.asarray(chosen, dtype=float)), under_detected


def decode_angles(w_hat, support, grid, num_users, cfg=None):
    """
    Angle estimates from a NN-LASSO solution and its support.

    Clusters are decoded, weak ones set aside, merged ones split, and the
    num_users heaviest centroids returned. Weak clusters only compete when
    too few detections remain after splitting.

    Returns:
        tuple: (clusters partitioning the support, sorted angles,
        True if fewer detections than users were found)
    """
    cfg = cfg or FistaConfig()
    decoded = centroid_decode(cluster_support(support), w_hat, grid)
    detections, weak = prune_clusters(decoded, cfg.cluster_mass_rel)
    found = len(detections)
    if found < num_users:
        logger.debug("NN-LASSO found %d cluster(s) for %d user(s); splitting", found, num_users)
        detections = split_clusters(detections, w_hat, grid, num_users)
    detections = split_merged(detections, w_hat, grid, num_users, cfg.merge_mass_ratio)

    candidates = detections if len(detections) >= num_users else detections + weak
    grid_center = 0.5 * (grid.min + grid.max)
    angles, padded = select_topk(candidates, num_users, fill_angle=grid_center)
    clusters = sorted(detections + weak, key=lambda c: c.indices[0])
    return clusters, angles, padded or found < num_users


def nnlasso_estimate(dictionary, y_centered, num_users, cfg=None, callback=None, record_traces=True):
    """
    Full NN-LASSO pipeline on one centered power profile.

    Args:
        dictionary (PowerDictionary): Centered atoms, grid and L
        y_centered (numpy.ndarray): Centered power profile
        num_users (int): K_U
        cfg (FistaConfig, optional): Solver settings
        callback (callable, optional): Per-iteration hook for fista_solve
        record_traces (bool): Keep objective and model-error traces

    Returns:
        NnlassoResult: Coefficients, clusters, angles and diagnostics
    """
    cfg = cfg or FistaConfig()
    fista = fista_solve(dictionary.centered, y_centered, cfg, lipschitz=dictionary.lipschitz,
                        callback=callback, record_traces=record_traces)
    support, empty = detect_support(fista.w, cfg.support_tau_rel)
    if empty:
        logger.warning("NN-LASSO returned an all-zero solution")
    clusters, angles, under_detected = decode_angles(fista.w, support, dictionary.grid, num_users, cfg)

    return NnlassoResult(
        w_hat=fista.w,
        support=support,
        clusters=clusters,
        angles=angles,
        objective_trace=fista.objective_trace,
        model_error_trace=fista.model_error_trace,
        iterations=fista.iterations,
        converged=fista.converged,
        under_detected=under_detected,
        lambda_reg=fista.lambda_reg,
        flags={"empty_support": bool(empty)},
    )
