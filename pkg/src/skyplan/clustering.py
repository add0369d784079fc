"""Station clustering: K-means, Gaussian-mixture EM, and their combination.

The combined algorithm (K-means seeding followed by EM on a Gaussian
mixture) partitions base stations into aerial cells: K-means supplies
initial means, covariances start as identity matrices and mixing
weights as 1/K, then EM refines all parameters until the log-likelihood
converges.  Cluster labels are the argmax responsibilities.

Numerics: Gaussian densities are evaluated in log space via Cholesky
factors and responsibilities normalized with log-sum-exp; covariances
get a small data-scaled ridge after every M step so single-point
components cannot collapse to singular matrices.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from .errors import InputError, ValidationError

log = logging.getLogger("skyplan.clustering")

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITERS = 500
COV_RIDGE_FACTOR = 1e-6

_MODEL_MAGIC = "skyplan-gmm 1"


@dataclass
class KmeansResult:
    """Final centroids and assignment of one Lloyd run.

    ``centroids`` has one row per surviving cluster (clusters that lose
    all points are dropped, so there may be fewer than requested).
    ``inertia_trace`` holds the total squared distance after each
    update step; it is nonincreasing.
    """

    centroids: np.ndarray
    labels: np.ndarray
    inertia: float
    iterations: int
    inertia_trace: list[float] = field(default_factory=list)


@dataclass
class GmmModel:
    """Gaussian mixture: weights (K,), means (K, M), covariances (K, M, M)."""

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.means = np.asarray(self.means, dtype=float)
        self.covariances = np.asarray(self.covariances, dtype=float)
        k, m = self.means.shape
        if self.weights.shape != (k,):
            raise ValidationError("weights shape must match number of components")
        if self.covariances.shape != (k, m, m):
            raise ValidationError("covariances must be (K, M, M)")
        if abs(float(self.weights.sum()) - 1.0) > 1e-12:
            raise ValidationError("mixing weights must sum to 1")
        if np.any(self.weights < 0):
            raise ValidationError("mixing weights must be nonnegative")

    @property
    def k(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def save(self, path) -> None:
        lines = [_MODEL_MAGIC, f"k {self.k} dim {self.dim}"]
        for j in range(self.k):
            lines.append("weight " + repr(float(self.weights[j])))
            lines.append("mean " + " ".join(repr(float(v)) for v in self.means[j]))
            lines.append("cov " + " ".join(repr(float(v)) for v in self.covariances[j].ravel()))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "GmmModel":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                lines = [ln.strip() for ln in fh
                         if ln.strip() and not ln.lstrip().startswith("#")]
        except OSError as exc:
            raise InputError(f"cannot read model file {path}: {exc}") from exc
        if not lines or lines[0] != _MODEL_MAGIC:
            raise ValidationError(f"{path}: not a '{_MODEL_MAGIC}' file")
        header = lines[1].split()
        k, dim = int(header[1]), int(header[3])
        if len(lines) != 2 + 3 * k:
            raise ValidationError(f"{path}: expected {2 + 3 * k} lines, got {len(lines)}")
        weights, means, covs = [], [], []
        for j in range(k):
            w_line, m_line, c_line = lines[2 + 3 * j: 5 + 3 * j]
            weights.append(float(w_line.split()[1]))
            means.append([float(v) for v in m_line.split()[1:]])
            covs.append(np.array([float(v) for v in c_line.split()[1:]]).reshape(dim, dim))
        return cls(np.array(weights), np.array(means), np.array(covs))


@dataclass
class KegResult:
    """EM output: fitted mixture, responsibilities, labels, and LL trace."""

    model: GmmModel
    responsibilities: np.ndarray
    labels: np.ndarray
    log_likelihood_trace: list[float]


# ---------------------------------------------------------------------------
# K-means
# ---------------------------------------------------------------------------

def _assign(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return d2.argmin(axis=1)


def _inertia(points: np.ndarray, centroids: np.ndarray, labels: np.ndarray) -> float:
    return float(((points - centroids[labels]) ** 2).sum())


def kmeans(points: np.ndarray, k: int, seed: int = 0, max_iters: int = 300,
           reseed_empty: bool = False) -> KmeansResult:
    """Lloyd's algorithm with deterministic seeding.

    Initial centroids are ``k`` rows sampled without replacement.  A
    cluster whose membership empties is dropped (the effective K
    shrinks) unless ``reseed_empty`` is set, in which case it restarts
    at the point currently farthest from its assigned centroid.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValidationError("points must be a nonempty (N, M) array")
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValidationError(f"need 1 <= k <= {n}, got {k}")

    rng = np.random.default_rng(seed)
    centroids = points[rng.choice(n, size=k, replace=False)].copy()
    labels = _assign(points, centroids)
    trace: list[float] = []
    iterations = 0

    for iterations in range(1, max_iters + 1):
        labels = _assign(points, centroids)

        counts = np.bincount(labels, minlength=centroids.shape[0])
        empty = np.flatnonzero(counts == 0)
        if empty.size and reseed_empty:
            d2 = ((points - centroids[labels]) ** 2).sum(axis=1)
            for idx in empty:
                far = int(d2.argmax())
                centroids[idx] = points[far]
                labels[far] = idx
                d2[far] = 0.0
            counts = np.bincount(labels, minlength=centroids.shape[0])
            empty = np.flatnonzero(counts == 0)
        if empty.size:
            keep = np.flatnonzero(counts > 0)
            log.info("dropping %d empty cluster(s); k: %d -> %d",
                     empty.size, centroids.shape[0], keep.size)
            remap = np.full(centroids.shape[0], -1, dtype=int)
            remap[keep] = np.arange(keep.size)
            centroids = centroids[keep]
            labels = remap[labels]

        new_centroids = np.vstack([
            points[labels == j].mean(axis=0) for j in range(centroids.shape[0])
        ])
        trace.append(_inertia(points, new_centroids, labels))
        converged = (new_centroids.shape == centroids.shape
                     and np.array_equal(new_centroids, centroids))
        centroids = new_centroids
        if converged:
            break

    return KmeansResult(
        centroids=centroids,
        labels=labels,
        inertia=_inertia(points, centroids, labels),
        iterations=iterations,
        inertia_trace=trace,
    )


# ---------------------------------------------------------------------------
# EM on a Gaussian mixture
# ---------------------------------------------------------------------------

def _cov_ridge(points: np.ndarray) -> float:
    scale = float(points.var(axis=0).mean())
    if scale <= 0.0:
        scale = 1.0
    return COV_RIDGE_FACTOR * scale


def _log_gaussian(points: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Log N(x | mean, cov) for every row of points, via Cholesky."""
    m = points.shape[1]
    chol = np.linalg.cholesky(cov)
    diff = points - mean
    z = solve_triangular(chol, diff.T, lower=True)
    maha = (z ** 2).sum(axis=0)
    log_det = 2.0 * np.log(np.diag(chol)).sum()
    return -0.5 * (m * np.log(2.0 * np.pi) + log_det + maha)


def _log_joint(points: np.ndarray, model: GmmModel) -> np.ndarray:
    """(N, K) matrix of log(pi_k N(x_n | mu_k, sigma_k)), -inf for pi_k = 0."""
    out = np.empty((points.shape[0], model.k))
    with np.errstate(divide="ignore"):
        log_w = np.log(model.weights)
    for j in range(model.k):
        if model.weights[j] == 0.0:
            out[:, j] = -np.inf
        else:
            out[:, j] = log_w[j] + _log_gaussian(points, model.means[j],
                                                 model.covariances[j])
    return out


def log_likelihood(points: np.ndarray, model: GmmModel) -> float:
    return float(logsumexp(_log_joint(points, model), axis=1).sum())


def responsibilities(points: np.ndarray, model: GmmModel) -> np.ndarray:
    """Posterior component probabilities, rows summing to one."""
    lj = _log_joint(points, model)
    return np.exp(lj - logsumexp(lj, axis=1, keepdims=True))


def _check_points(points: np.ndarray, dim: int | None = None) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValidationError("points must be a nonempty (N, M) array")
    if not np.isfinite(points).all():
        raise ValidationError("points contain NaN or inf")
    if dim is not None and points.shape[1] != dim:
        raise ValidationError(f"points have dimension {points.shape[1]}, model needs {dim}")
    return points


def em_fit(points: np.ndarray, init: GmmModel, tol: float = DEFAULT_TOL,
           max_iters: int = DEFAULT_MAX_ITERS) -> KegResult:
    """Expectation-maximization from a given starting mixture.

    Alternates the posterior (E) step and the closed-form parameter (M)
    step, recording the log-likelihood after every M step; iteration
    stops when the trace improves by less than ``tol`` or at
    ``max_iters``.  The returned responsibilities and labels come from
    a final E step under the final parameters, so
    ``assign_labels(result.model, points)`` reproduces them exactly.
    """
    points = _check_points(points, init.dim)
    n = points.shape[0]
    ridge = _cov_ridge(points)

    weights = init.weights.copy()
    means = init.means.copy()
    covs = init.covariances.copy()
    model = GmmModel(weights, means, covs)

    trace = [log_likelihood(points, model)]
    for _ in range(max_iters):
        gamma = responsibilities(points, model)

        nk = gamma.sum(axis=0)
        nk_safe = np.maximum(nk, np.finfo(float).tiny)
        means = (gamma.T @ points) / nk_safe[:, None]
        covs = np.empty_like(model.covariances)
        for j in range(model.k):
            diff = points - means[j]
            cov = (gamma[:, j][:, None] * diff).T @ diff / nk_safe[j]
            cov = 0.5 * (cov + cov.T)
            cov[np.diag_indices_from(cov)] += ridge
            covs[j] = cov
        weights = nk / nk.sum()
        model = GmmModel(weights, means, covs)

        trace.append(log_likelihood(points, model))
        if abs(trace[-1] - trace[-2]) < tol:
            break

    gamma = responsibilities(points, model)
    labels = gamma.argmax(axis=1)
    return KegResult(model=model, responsibilities=gamma, labels=labels,
                     log_likelihood_trace=trace)


def keg(points: np.ndarray, k: int, seed: int = 0, tol: float = DEFAULT_TOL,
        max_iters: int = DEFAULT_MAX_ITERS) -> KegResult:
    """K-means-seeded EM: means from K-means, identity covariances, equal weights.

    The effective component count is the number of clusters K-means
    retains, which can be smaller than requested.
    """
    points = _check_points(points)
    km = kmeans(points, k, seed=seed)
    k_eff = km.centroids.shape[0]
    m = points.shape[1]
    init = GmmModel(
        weights=np.full(k_eff, 1.0 / k_eff),
        means=km.centroids.copy(),
        covariances=np.broadcast_to(np.eye(m), (k_eff, m, m)).copy(),
    )
    return em_fit(points, init, tol=tol, max_iters=max_iters)


def assign_labels(model: GmmModel, points: np.ndarray) -> np.ndarray:
    """Argmax-responsibility labels under a fixed mixture (no refitting).

    Ties resolve to the lowest component index.
    """
    points = _check_points(points, model.dim)
    return responsibilities(points, model).argmax(axis=1)
