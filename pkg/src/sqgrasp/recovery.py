"""Recover multiple locally-fitting superquadrics from a point cloud.

Each point is modeled as drawn either from a Gaussian around the nearest
point of a superquadric surface or from a uniform outlier component over the
workspace volume. A deterministic EM-style alternation (soft membership;
weighted nonlinear least squares over all 11 parameters with an annealed
noise scale) fits one superquadric per seed. Seeds come from K-means
clusters, each replaced by its inertia-equivalent ellipsoid shrunk so every
principal moment halves, plus one extra seed built from the whole cloud.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import least_squares
from scipy.spatial import cKDTree

from . import geom
from . import superquadric as sqm
from .cloud import PointCloud
from .errors import DegenerateCluster, FitDiverged, NoRecovery
from .superquadric import Superquadric

GAUSS_NORM = (2.0 * np.pi) ** 1.5

MIN_INLIERS = 30
DEDUP_REL = 0.05

_MEMBERSHIP_SAMPLES = 2000


@dataclass(frozen=True)
class Workspace:
    """Axis-aligned box enclosing the cloud; its volume feeds the outlier density."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if np.any(hi <= lo):
            raise ValueError("workspace must have positive extent on every axis")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))

    @staticmethod
    def from_cloud(cloud: PointCloud, pad: float = 1e-4) -> "Workspace":
        lo, hi = cloud.bounds()
        ext = np.maximum(hi - lo, 1e-6)
        return Workspace(lo - pad * ext, hi + pad * ext + 1e-9)


@dataclass(frozen=True)
class RecoveryParams:
    """Knobs of the mixture fit; defaults follow the tabletop setup."""

    outlier_prior: float = 0.7
    noise_sigma: float = 0.005
    max_iters: int = 60
    converge_tol: float = 1e-4
    inlier_threshold: float = 0.5
    anneal_factor: float = 0.9
    sigma_floor: float = 0.001
    surface_samples: int = 2000
    coverage_d_th: float = 0.01

    def __post_init__(self):
        if not (0.0 < self.outlier_prior < 1.0):
            raise ValueError("outlier_prior must be in (0, 1)")
        if self.noise_sigma <= 0:
            raise ValueError("noise_sigma must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass(frozen=True)
class MembershipPosterior:
    """Per-point surface-membership weight and nearest surface point."""

    weights: np.ndarray
    mu: np.ndarray


@dataclass(frozen=True)
class RecoveryResult:
    """One fitted superquadric with its supporting subset and diagnostics."""

    sq: Superquadric
    inliers: np.ndarray
    alpha: float
    beta: float
    init_index: int

    def to_json(self) -> dict:
        return {
            "superquadric": self.sq.to_json(),
            "inlier_indices": [int(i) for i in self.inliers],
            "alpha": float(self.alpha),
            "beta": float(self.beta),
            "init_index": int(self.init_index),
        }


def choose_K(n_points: int) -> int:
    """Number of cluster seeds as a function of cloud size."""
    if n_points < 1:
        raise ValueError("n_points must be positive")
    if n_points < 8000:
        return 6
    return 8 + 2 * ((n_points - 8000) // 4000)


# ---------------------------------------------------------------------------
# seeding

def _kmeans(pts: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Lloyd's algorithm with k-means++ seeding; fully deterministic per rng."""
    n = len(pts)
    centers = np.empty((k, 3))
    centers[0] = pts[rng.integers(n)]
    d2 = np.sum((pts - centers[0]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[i] = pts[rng.integers(n)]
            continue
        r = rng.random() * total
        centers[i] = pts[min(np.searchsorted(np.cumsum(d2), r), n - 1)]
        d2 = np.minimum(d2, np.sum((pts - centers[i]) ** 2, axis=1))

    labels = np.zeros(n, dtype=int)
    for _ in range(100):
        dists = np.linalg.norm(pts[:, None, :] - centers[None, :, :], axis=2)
        new_labels = np.argmin(dists, axis=1)
        for i in range(k):
            sel = new_labels == i
            if np.any(sel):
                centers[i] = pts[sel].mean(axis=0)
            else:  # re-seed an empty cluster at the worst-covered point
                far = int(np.argmax(np.min(dists, axis=1)))
                centers[i] = pts[far]
                new_labels[far] = i
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return labels


def _moi_ellipsoid(pts: np.ndarray) -> Superquadric:
    """Inertia-equivalent ellipsoid of a point set, each moment halved.

    A uniform solid ellipsoid with semi-axes a has covariance diag(a^2)/5,
    so the equivalent semi-axes are sqrt(5*lambda); halving every principal
    moment of inertia scales them by 1/sqrt(2).
    """
    if len(pts) < 4:
        raise DegenerateCluster(f"cluster of {len(pts)} points")
    c = pts.mean(axis=0)
    cov = (pts - c).T @ (pts - c) / len(pts)
    evals, evecs = np.linalg.eigh(cov)
    if evals[0] <= 1e-12 * max(evals[-1], 1e-30):
        raise DegenerateCluster("rank-deficient covariance")
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    for j in range(3):  # deterministic eigenvector signs
        if evecs[np.argmax(np.abs(evecs[:, j])), j] < 0:
            evecs[:, j] = -evecs[:, j]
    if np.linalg.det(evecs) < 0:
        evecs[:, 2] = -evecs[:, 2]
    semi = np.sqrt(2.5 * evals)
    semi = np.maximum(semi, 0.002)
    return Superquadric(1.0, 1.0, semi[0], semi[1], semi[2], geom.make_pose(evecs, c))


def _bbox_ellipsoid(pts: np.ndarray) -> Superquadric:
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    semi = np.maximum((hi - lo) / 2.0, 0.002)
    return Superquadric(1.0, 1.0, *semi, geom.make_pose(np.eye(3), (lo + hi) / 2.0))


def initialize_ellipsoids(cloud: PointCloud, K: int, rng_seed: int):
    """K cluster-seeded ellipsoids plus one from the full cloud (K+1 total)."""
    pts = cloud.points
    if len(pts) < K * 10:
        raise ValueError(f"need at least {K * 10} points for K={K}")
    rng = np.random.default_rng(rng_seed)
    labels = _kmeans(pts, K, rng)
    seeds = []
    for i in range(K):
        cluster = pts[labels == i]
        try:
            seeds.append(_moi_ellipsoid(cluster))
        except DegenerateCluster:
            seeds.append(_bbox_ellipsoid(cluster if len(cluster) else pts))
    try:
        seeds.append(_moi_ellipsoid(pts))
    except DegenerateCluster:
        seeds.append(_bbox_ellipsoid(pts))
    return seeds


# ---------------------------------------------------------------------------
# E-step

def _surface_distances(sq: Superquadric, pts: np.ndarray):
    """Nearest sample point on the surface and a refined distance to it.

    The raw nearest-sample distance overestimates by up to half the sample
    spacing; projecting onto the tangent plane at the nearest sample removes
    that quantization bias (clamped by the raw distance for safety).
    """
    S = sqm.dense_surface_points(sq, _MEMBERSHIP_SAMPLES)
    tree = cKDTree(S)
    d_nn, idx = tree.query(pts)
    mu = S[idx]
    normals = sqm.surface_normals(sq, mu)
    d_plane = np.abs(np.einsum("ij,ij->i", pts - mu, normals))
    return mu, np.minimum(d_nn, d_plane)


def membership_posterior(cloud: PointCloud, sq: Superquadric,
                         params: RecoveryParams, ws: Workspace) -> MembershipPosterior:
    """Posterior probability that each point belongs to the surface component.

    weight = (1-w_o) N(d; sigma) / ((1-w_o) N(d; sigma) + w_o / V) with an
    isotropic Gaussian of scale params.noise_sigma around the nearest
    surface point and a uniform outlier density 1/V over the workspace.
    """
    mu, d = _surface_distances(sq, cloud.points)
    sigma = params.noise_sigma
    w_o = params.outlier_prior
    gauss = np.exp(-0.5 * (d / sigma) ** 2) / (GAUSS_NORM * sigma**3)
    num = (1.0 - w_o) * gauss
    weights = num / (num + w_o / ws.volume)
    return MembershipPosterior(weights, mu)


# ---------------------------------------------------------------------------
# M-step

def _pack(sq: Superquadric) -> np.ndarray:
    return np.concatenate([
        [sq.eps1, sq.eps2, sq.ax, sq.ay, sq.az],
        sq.translation,
        geom.rotvec_from_matrix(sq.rotation),
    ])


def _unpack(theta: np.ndarray) -> Superquadric:
    R = geom.matrix_from_rotvec(theta[8:11])
    return Superquadric(theta[0], theta[1], theta[2], theta[3], theta[4],
                        geom.make_pose(R, theta[5:8]))


def _residuals(theta: np.ndarray, pts: np.ndarray, sqrt_w: np.ndarray) -> np.ndarray:
    """Weighted radial-distance residuals; the surrogate for point-to-surface."""
    e1, e2 = theta[0], theta[1]
    axes = theta[2:5]
    R = geom.matrix_from_rotvec(theta[8:11])
    q = (pts - theta[5:8]) @ R
    r = np.linalg.norm(q, axis=1)
    lf = sqm._log_implicit_canonical(e1, e2, axes[0], axes[1], axes[2], q)
    beta = np.exp(-0.5 * e1 * lf)
    beta = np.where(np.isfinite(beta), beta, 0.0)
    return sqrt_w * r * np.abs(1.0 - beta)


def _bounds(ws: Workspace):
    margin = 0.1 * ws.diagonal
    lb = np.concatenate([[sqm.EPS_MIN, sqm.EPS_MIN], [0.002] * 3,
                         ws.lo - margin, [-2 * np.pi] * 3])
    ub = np.concatenate([[sqm.EPS_MAX, sqm.EPS_MAX], [ws.diagonal] * 3,
                         ws.hi + margin, [2 * np.pi] * 3])
    return lb, ub


_MSTEP_MAX_POINTS = 900


def _fit_subset(n: int) -> np.ndarray:
    """Deterministic stride subsample used by every M-step of one fit."""
    if n <= _MSTEP_MAX_POINTS:
        return np.arange(n)
    return np.linspace(0, n - 1, _MSTEP_MAX_POINTS).astype(int)


def _m_step(theta, pts, weights, bounds, max_nfev=18):
    sel = weights > 1e-8
    if not np.any(sel):
        return theta
    sqrt_w = np.sqrt(weights[sel])
    x0 = np.clip(theta, bounds[0] + 1e-12, bounds[1] - 1e-12)
    res = least_squares(_residuals, x0, bounds=bounds, method="trf",
                        max_nfev=max_nfev, args=(pts[sel], sqrt_w),
                        xtol=1e-11, ftol=1e-10, gtol=1e-10)
    return res.x


def _weighted_sse(theta, pts, weights):
    r = _residuals(theta, pts, np.sqrt(weights))
    return float(np.dot(r, r))


# Frame relabelings used to hop out of orientation local minima: quarter
# turns so another principal direction plays the role of the eps1 axis
# (semi-axes permuted), and an eighth turn about z that undoes the classic
# trap where a boxy cross-section is fitted as its 45-degree "diamond" with
# a compensating exponent. Exponents restart at 1 in every candidate.
_SWAPS = (
    (geom.rot_x(-np.pi / 2), (0, 2, 1)),  # new z-axis along old y
    (geom.rot_y(np.pi / 2), (2, 1, 0)),   # new z-axis along old x
    (geom.rot_z(np.pi / 4), (0, 1, 2)),
    (geom.rot_z(-np.pi / 4), (0, 1, 2)),
)


def _axis_swap_candidates(theta):
    out = []
    R = geom.matrix_from_rotvec(theta[8:11])
    for M, perm in _SWAPS:
        cand = theta.copy()
        cand[0:2] = 1.0
        cand[2:5] = theta[2:5][list(perm)]
        cand[8:11] = geom.rotvec_from_matrix(R @ M)
        out.append(cand)
    return out


def _try_axis_swaps(theta, pts, weights, bounds):
    best_sse = _weighted_sse(theta, pts, weights)
    mass = weights.sum()
    if mass > 0 and np.sqrt(best_sse / mass) < 5e-4:
        return theta  # RMS residual already below half a millimeter
    best = theta
    for cand in _axis_swap_candidates(theta):
        refined = _m_step(cand, pts, weights, bounds, max_nfev=15)
        sse = _weighted_sse(refined, pts, weights)
        if sse < best_sse - 1e-15:
            best, best_sse = refined, sse
    return best


_SWAP_CHECK_ITERS = (4, 12)


def fit_superquadric(cloud: PointCloud, init: Superquadric,
                     params: RecoveryParams, ws: Workspace,
                     init_index: int = 0) -> RecoveryResult:
    """Fit one superquadric by alternating membership and weighted least squares.

    The Gaussian scale anneals by params.anneal_factor per iteration down to
    params.sigma_floor; convergence on relative parameter change is only
    honored once annealing has finished. Raises FitDiverged on NaNs or when
    the surface component loses effectively all support.
    """
    from .scoring import coverage_ratio, point_to_surface

    pts = cloud.points
    theta = _pack(init)
    bounds = _bounds(ws)
    sigma = params.noise_sigma
    for it in range(params.max_iters):
        sq = _unpack(theta)
        mem = membership_posterior(cloud, sq, replace(params, noise_sigma=sigma), ws)
        w = mem.weights
        if w.sum() < 5.0:
            raise FitDiverged("surface component lost all support")
        new_theta = _m_step(theta, pts, w, bounds)
        if not np.all(np.isfinite(new_theta)):
            raise FitDiverged("non-finite parameters during optimization")
        if it in _SWAP_CHECK_ITERS:
            new_theta = _try_axis_swaps(new_theta, pts, w, bounds)
        rel = np.max(np.abs(new_theta - theta) / np.maximum(np.abs(theta), 1e-2))
        annealed = sigma <= params.sigma_floor * (1 + 1e-9)
        theta = new_theta
        sigma = max(sigma * params.anneal_factor, params.sigma_floor)
        if annealed and rel < params.converge_tol:
            break

    sq = sqm.canonical_representation(_unpack(theta))
    mem = membership_posterior(cloud, sq, replace(params, noise_sigma=sigma), ws)
    inliers = np.nonzero(mem.weights >= params.inlier_threshold)[0]
    if len(inliers) == 0:
        raise FitDiverged("no inliers at convergence")
    S = sqm.sample_surface(sq, params.surface_samples)
    alpha = point_to_surface(pts[inliers], S)
    beta = coverage_ratio(pts[inliers], S, params.coverage_d_th)
    return RecoveryResult(sq, inliers, alpha, beta, init_index)


# ---------------------------------------------------------------------------
# multi-seed driver

def _similar(a: RecoveryResult, b: RecoveryResult) -> bool:
    """Parameter agreement within ~5%, orientation modulo the flip group."""
    sa, sb = a.sq, b.sq
    scale = max(np.max(sa.semi_axes), np.max(sb.semi_axes))
    if np.any(np.abs(sa.semi_axes - sb.semi_axes)
              > DEDUP_REL * np.maximum(sa.semi_axes, sb.semi_axes)):
        return False
    if abs(sa.eps1 - sb.eps1) > DEDUP_REL * (sqm.EPS_MAX - sqm.EPS_MIN):
        return False
    if abs(sa.eps2 - sb.eps2) > DEDUP_REL * (sqm.EPS_MAX - sqm.EPS_MIN):
        return False
    if np.linalg.norm(sa.translation - sb.translation) > DEDUP_REL * scale:
        return False
    return geom.flip_symmetric_angle(sa.rotation, sb.rotation) <= DEDUP_REL * np.pi


def _dedup(results):
    kept = []
    for r in sorted(results, key=lambda r: (-r.beta, r.init_index)):
        if not any(_similar(r, k) for k in kept):
            kept.append(r)
    return sorted(kept, key=lambda r: r.init_index)


def recover_superquadrics(cloud: PointCloud, params: RecoveryParams,
                          rng_seed: int, k_override: int | None = None,
                          threads: int = 1):
    """Run the K+1 seeded fits and return the surviving, deduplicated results.

    Seeds run independently; results are combined by seed index so thread
    count never changes the output. Raises NoRecovery when every seed fails.
    """
    if len(cloud) == 0:
        raise NoRecovery("empty cloud")
    K = choose_K(len(cloud)) if k_override is None else k_override
    K = max(1, min(K, len(cloud) // 10))
    if K < 1:
        raise NoRecovery("too few points to seed any fit")
    ws = Workspace.from_cloud(cloud)
    seeds = initialize_ellipsoids(cloud, K, rng_seed)

    def run(item):
        idx, seed = item
        try:
            return fit_superquadric(cloud, seed, params, ws, init_index=idx)
        except FitDiverged:
            return None

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            fits = list(ex.map(run, enumerate(seeds)))
    else:
        fits = [run(item) for item in enumerate(seeds)]

    results = [r for r in fits if r is not None and len(r.inliers) >= MIN_INLIERS]
    results = _dedup(results)
    if not results:
        raise NoRecovery("all seeds diverged or were rejected")
    return results
