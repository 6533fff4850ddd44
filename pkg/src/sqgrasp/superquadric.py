"""Superquadric geometry: parameterization, implicit function, surface
sampling, curvature, symmetry and shape classification.

A superquadric is described by two shape exponents (eps1, eps2), three
semi-axis lengths (ax, ay, az) and a rigid pose. In its canonical frame the
surface is the image of

    p(eta, omega) = [ ax * C(eta)^eps1 * C(omega)^eps2,
                      ay * C(eta)^eps1 * S(omega)^eps2,
                      az * S(eta)^eps1 ]

with signed powers C(a)^e = sgn(cos a)|cos a|^e and S(a)^e likewise for sin,
eta in [-pi/2, pi/2], omega in (-pi, pi]. The matching inside-outside
function is

    F(x) = ((|x|/ax)^(2/eps2) + (|y|/ay)^(2/eps2))^(eps2/eps1)
           + (|z|/az)^(2/eps1)

which is 1 on the surface, < 1 inside and > 1 outside. F is positively
homogeneous along rays from the center: F(k*x) = k^(2/eps1) * F(x), so
F(x)^(-eps1/2) * x projects x radially onto the surface.
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from . import geom
from .errors import EmptyPatch, SingularParam

EPS_MIN = 0.01
EPS_MAX = 2.0

# Parameter bands excluded around parameterization singularities: the poles
# (eta = +-pi/2) for every shape, and the signed-power kink lines (eta = 0,
# omega multiple of pi/2) when the relevant exponent is < 1.
POLE_BAND = 1e-3
KINK_BAND = 1e-3

_FD_STEP = 1e-5  # central-difference step for curvature, radians

_SAMPLE_CACHE: OrderedDict = OrderedDict()
_SAMPLE_CACHE_MAX = 64
_SAMPLE_LOCK = threading.Lock()


def signed_pow(v, e):
    """sgn(v) * |v|**e, the signed power used by the parameterization."""
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.abs(v) ** e


@dataclass(frozen=True)
class SurfaceParam:
    """Angular surface coordinates eta in [-pi/2, pi/2], omega in (-pi, pi]."""

    eta: float
    omega: float

    def __post_init__(self):
        if not (-np.pi / 2 - 1e-12 <= self.eta <= np.pi / 2 + 1e-12):
            raise ValueError(f"eta out of range: {self.eta}")
        if not (-np.pi - 1e-12 < self.omega <= np.pi + 1e-12):
            raise ValueError(f"omega out of range: {self.omega}")


@dataclass(frozen=True)
class Superquadric:
    """11-parameter superquadric: two exponents, three semi-axes, rigid pose.

    Exponents are clamped into [0.01, 2.0]; outside that range |.|^(2/eps)
    is numerically explosive and the shapes are never produced by the
    recovery stage. Semi-axes must be positive and the pose rotation
    orthonormal with determinant +1 (tolerance 1e-9).
    """

    eps1: float
    eps2: float
    ax: float
    ay: float
    az: float
    pose: np.ndarray = field(default_factory=lambda: np.eye(4))

    def __post_init__(self):
        object.__setattr__(self, "eps1", float(np.clip(self.eps1, EPS_MIN, EPS_MAX)))
        object.__setattr__(self, "eps2", float(np.clip(self.eps2, EPS_MIN, EPS_MAX)))
        for name in ("ax", "ay", "az"):
            v = float(getattr(self, name))
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"semi-axis {name} must be positive, got {v}")
            object.__setattr__(self, name, v)
        pose = np.array(self.pose, dtype=float)
        if pose.shape != (4, 4) or not np.allclose(pose[3], [0, 0, 0, 1], atol=1e-12):
            raise ValueError("pose must be a 4x4 rigid transform")
        if not geom.is_rotation(pose[:3, :3], tol=1e-9):
            raise ValueError("pose rotation must be orthonormal with det +1")
        pose.flags.writeable = False
        object.__setattr__(self, "pose", pose)

    @property
    def rotation(self) -> np.ndarray:
        return self.pose[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.pose[:3, 3]

    @property
    def semi_axes(self) -> np.ndarray:
        return np.array([self.ax, self.ay, self.az])

    def to_world(self, pts: np.ndarray) -> np.ndarray:
        return geom.apply_pose(self.pose, pts)

    def to_canonical(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return (pts - self.translation) @ self.rotation

    def cache_key(self) -> tuple:
        return (self.eps1, self.eps2, self.ax, self.ay, self.az, self.pose.tobytes())

    def to_json(self) -> dict:
        q = geom.quat_wxyz_from_matrix(self.rotation)
        return {
            "eps1": self.eps1,
            "eps2": self.eps2,
            "ax": self.ax,
            "ay": self.ay,
            "az": self.az,
            "position": [float(v) for v in self.translation],
            "quaternion": [float(v) for v in q],
        }

    @staticmethod
    def from_json(obj: dict) -> "Superquadric":
        R = geom.matrix_from_quat_wxyz(obj["quaternion"])
        pose = geom.make_pose(R, obj["position"])
        return Superquadric(obj["eps1"], obj["eps2"], obj["ax"], obj["ay"], obj["az"], pose)


_KIND_ORDER = ("cuboid", "cylinder", "prism", "rect_base", "circ_base", "generic")


@dataclass(frozen=True)
class ShapeClass:
    """Degenerate-shape classification driving extra closing-line families."""

    kind: str
    is_eps1_small: bool
    is_eps2_small: bool
    is_circular: bool


def _canonical_surface(eps1, eps2, ax, ay, az, etas, omegas):
    """Canonical-frame surface points for broadcastable eta/omega arrays."""
    ce = signed_pow(np.cos(etas), eps1)
    se = signed_pow(np.sin(etas), eps1)
    cw = signed_pow(np.cos(omegas), eps2)
    sw = signed_pow(np.sin(omegas), eps2)
    return np.stack([ax * ce * cw, ay * ce * sw, az * se], axis=-1)


def surface_point(sq: Superquadric, p: SurfaceParam) -> np.ndarray:
    """World-frame surface point at the given angular parameters."""
    pc = _canonical_surface(sq.eps1, sq.eps2, sq.ax, sq.ay, sq.az,
                            np.asarray(p.eta), np.asarray(p.omega))
    return sq.to_world(pc)


def surface_points(sq: Superquadric, etas, omegas) -> np.ndarray:
    """Vectorized world-frame surface points for arrays of parameters."""
    pc = _canonical_surface(sq.eps1, sq.eps2, sq.ax, sq.ay, sq.az,
                            np.asarray(etas, dtype=float), np.asarray(omegas, dtype=float))
    return sq.to_world(pc)


def _log_implicit_canonical(eps1, eps2, ax, ay, az, q):
    """log F for canonical points q (..., 3); stable for extreme exponents."""
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore"):
        lx = np.log(np.abs(q[..., 0]) / ax)
        ly = np.log(np.abs(q[..., 1]) / ay)
        lz = np.log(np.abs(q[..., 2]) / az)
    lg = np.logaddexp(lx * (2.0 / eps2), ly * (2.0 / eps2))
    return np.logaddexp(lg * (eps2 / eps1), lz * (2.0 / eps1))


def log_implicit(sq: Superquadric, x) -> np.ndarray:
    return _log_implicit_canonical(sq.eps1, sq.eps2, sq.ax, sq.ay, sq.az,
                                   sq.to_canonical(x))


def implicit_value(sq: Superquadric, x):
    """Inside-outside value F(x): 1 on the surface, <1 inside, >1 outside."""
    out = np.exp(log_implicit(sq, x))
    return float(out) if out.ndim == 0 else out


def radial_scale(sq: Superquadric, x) -> np.ndarray:
    """Scale factor b such that b*(x - center) lies on the surface."""
    return np.exp(-0.5 * sq.eps1 * log_implicit(sq, x))


def radial_distance(sq: Superquadric, x) -> np.ndarray:
    """Radial (along-ray) distance from x to the surface, in meters."""
    q = sq.to_canonical(x)
    r = np.linalg.norm(q, axis=-1)
    lf = _log_implicit_canonical(sq.eps1, sq.eps2, sq.ax, sq.ay, sq.az, q)
    beta = np.exp(-0.5 * sq.eps1 * lf)
    return r * np.abs(1.0 - np.where(np.isfinite(beta), beta, 0.0))


def surface_normals(sq: Superquadric, x) -> np.ndarray:
    """Outward unit normals at (near-)surface points, from the F gradient.

    Computed in log space so tiny/huge intermediate powers cannot overflow.
    Degenerate gradients (axis poles at extreme exponents) fall back to the
    radial direction.
    """
    q = np.atleast_2d(sq.to_canonical(x))
    e1, e2 = sq.eps1, sq.eps2
    axes = sq.semi_axes
    with np.errstate(divide="ignore", invalid="ignore"):
        labs = np.log(np.abs(q) / axes)
        lg = np.logaddexp(labs[:, 0] * (2.0 / e2), labs[:, 1] * (2.0 / e2))
        logmag = np.empty_like(q)
        logmag[:, 0] = (e2 / e1 - 1.0) * lg + (2.0 / e2 - 1.0) * labs[:, 0] - np.log(axes[0])
        logmag[:, 1] = (e2 / e1 - 1.0) * lg + (2.0 / e2 - 1.0) * labs[:, 1] - np.log(axes[1])
        logmag[:, 2] = (2.0 / e1 - 1.0) * labs[:, 2] - np.log(axes[2])
        logmag[~np.isfinite(labs)] = -np.inf  # components vanishing on the axis planes
        peak = np.max(logmag, axis=1, keepdims=True)
        g = np.sign(q) * np.exp(logmag - peak)
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    bad = ~np.isfinite(norms[:, 0]) | (norms[:, 0] < 1e-300)
    if np.any(bad):
        rad = q[bad]
        rn = np.linalg.norm(rad, axis=1, keepdims=True)
        g[bad] = np.where(rn > 0, rad / np.maximum(rn, 1e-300), [0.0, 0.0, 1.0])
        norms[bad] = 1.0
    n = g / norms
    n = n @ sq.rotation.T
    return n[0] if np.asarray(x).ndim == 1 else n


# ---------------------------------------------------------------------------
# surface sampling

def _quarter_candidates(sq: Superquadric, n: int):
    """On-surface candidate points in the canonical quarter y>0, z>0.

    Union of radially projected sphere directions (covers flat faces that a
    uniform parameter grid misses at small exponents) and a cell-centered
    parameter grid (covers the thin waists/poles of extreme aspect ratios).
    """
    dirs = geom.fibonacci_sphere(n)
    dirs = np.column_stack([dirs[:, 0], np.abs(dirs[:, 1]), np.abs(dirs[:, 2])])
    lf = _log_implicit_canonical(sq.eps1, sq.eps2, sq.ax, sq.ay, sq.az, dirs)
    beta = np.exp(-0.5 * sq.eps1 * lf)
    proj = dirs * beta[:, None]

    m_eta = max(8, int(np.ceil(np.sqrt(n / 2.0))))
    m_om = 2 * m_eta
    etas = (np.arange(m_eta) + 0.5) * (np.pi / 2) / m_eta
    omegas = (np.arange(m_om) + 0.5) * np.pi / m_om
    ee, ww = np.meshgrid(etas, omegas, indexing="ij")
    grid = _canonical_surface(sq.eps1, sq.eps2, sq.ax, sq.ay, sq.az,
                              ee.ravel(), ww.ravel())

    cand = np.vstack([proj, grid])
    cand = cand[np.all(np.isfinite(cand), axis=1)]
    return cand


_ORBIT_SIGNS = np.array([
    [1.0, 1.0, 1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, -1.0],
    [-1.0, 1.0, -1.0],
])


def _orbit_fps(cand: np.ndarray, n_pick: int) -> np.ndarray:
    """Farthest-point selection over quarter candidates, flip-orbit aware.

    The running gap of each candidate is capped by its distance to its own
    mirror copies, so points whose orbit would self-collide (near the
    principal axes) are never picked early and the final orbit-expanded set
    keeps near-uniform spacing.
    """
    x, y, z = cand[:, 0], cand[:, 1], cand[:, 2]
    d_self = 2.0 * np.minimum.reduce([
        np.hypot(x, y), np.hypot(y, z), np.hypot(x, z),
    ])
    gap = d_self.copy()
    picked = np.empty(n_pick, dtype=int)
    idx = int(np.argmax(gap))
    for k in range(n_pick):
        picked[k] = idx
        gap[idx] = -np.inf
        p = cand[idx]
        for s in _ORBIT_SIGNS:
            d = np.linalg.norm(cand - p * s, axis=1)
            np.minimum(gap, d, out=gap)
        gap[picked[: k + 1]] = -np.inf
        idx = int(np.argmax(gap))
    return picked


def sample_surface(sq: Superquadric, target_count: int) -> np.ndarray:
    """Near-uniform on-surface sample of at least target_count points.

    The sample is exactly invariant under the flip-symmetry group: points
    are selected in a fundamental quarter and expanded by coordinate sign
    flips, so applying any of the four symmetry transforms permutes the set.
    """
    if target_count < 8:
        raise ValueError("target_count must be >= 8")
    key = sq.cache_key() + (int(target_count),)
    with _SAMPLE_LOCK:
        if key in _SAMPLE_CACHE:
            _SAMPLE_CACHE.move_to_end(key)
            return _SAMPLE_CACHE[key]

    n_pick = -(-target_count // 4)
    cand = _quarter_candidates(sq, max(2 * target_count, 1024))
    picked = _orbit_fps(cand, min(n_pick, len(cand)))
    quarter = cand[picked]
    full = (quarter[:, None, :] * _ORBIT_SIGNS[None, :, :]).reshape(-1, 3)
    pts = sq.to_world(full)
    pts.flags.writeable = False

    with _SAMPLE_LOCK:
        _SAMPLE_CACHE[key] = pts
        while len(_SAMPLE_CACHE) > _SAMPLE_CACHE_MAX:
            _SAMPLE_CACHE.popitem(last=False)
    return pts


def dense_surface_points(sq: Superquadric, count: int) -> np.ndarray:
    """Cheap dense on-surface sample (radially projected sphere directions).

    Used as the nearest-surface reference inside the recovery loop, where a
    fresh sample is needed every iteration; not guaranteed evenly spaced.
    """
    dirs = geom.fibonacci_sphere(count)
    lf = _log_implicit_canonical(sq.eps1, sq.eps2, sq.ax, sq.ay, sq.az, dirs)
    beta = np.exp(-0.5 * sq.eps1 * lf)
    return sq.to_world(dirs * beta[:, None])


# ---------------------------------------------------------------------------
# curvature

def is_singular_param(sq: Superquadric, eta: float, omega: float) -> bool:
    """True where curvature by parameter differencing is unreliable."""
    if abs(eta) >= np.pi / 2 - POLE_BAND:
        return True
    if sq.eps1 < 1.0 and abs(eta) <= KINK_BAND:
        return True
    if sq.eps2 < 1.0:
        rem = np.abs(np.remainder(omega + np.pi / 4, np.pi / 2) - np.pi / 4)
        if rem <= KINK_BAND:
            return True
    return False


def _curvatures_batch(sq: Superquadric, etas: np.ndarray, omegas: np.ndarray):
    """Gaussian curvature and area element via central differences.

    Returns (K, |r_eta x r_omega|); K is NaN where the fundamental forms
    degenerate numerically.
    """
    h = _FD_STEP
    de = np.array([0, h, -h, 0, 0, h, h, -h, -h])
    do = np.array([0, 0, 0, h, -h, h, -h, h, -h])
    ee = etas[:, None] + de[None, :]
    ww = omegas[:, None] + do[None, :]
    P = _canonical_surface(sq.eps1, sq.eps2, sq.ax, sq.ay, sq.az, ee, ww)

    r_e = (P[:, 1] - P[:, 2]) / (2 * h)
    r_w = (P[:, 3] - P[:, 4]) / (2 * h)
    r_ee = (P[:, 1] - 2 * P[:, 0] + P[:, 2]) / h**2
    r_ww = (P[:, 3] - 2 * P[:, 0] + P[:, 4]) / h**2
    r_ew = (P[:, 5] - P[:, 6] - P[:, 7] + P[:, 8]) / (4 * h**2)

    E = np.einsum("ij,ij->i", r_e, r_e)
    F = np.einsum("ij,ij->i", r_e, r_w)
    G = np.einsum("ij,ij->i", r_w, r_w)
    nvec = np.cross(r_e, r_w)
    nn = np.linalg.norm(nvec, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        nvec = nvec / nn[:, None]
        L = np.einsum("ij,ij->i", r_ee, nvec)
        M = np.einsum("ij,ij->i", r_ew, nvec)
        N = np.einsum("ij,ij->i", r_ww, nvec)
        denom = E * G - F * F
        K = (L * N - M * M) / denom
    K[(nn < 1e-30) | (np.abs(denom) < 1e-30)] = np.nan
    return K, nn


def gaussian_curvature(sq: Superquadric, p: SurfaceParam) -> float:
    """Gaussian curvature (1/m^2) from the first/second fundamental forms."""
    if is_singular_param(sq, p.eta, p.omega):
        raise SingularParam(f"parameter (eta={p.eta}, omega={p.omega}) is singular")
    K, _ = _curvatures_batch(sq, np.array([p.eta]), np.array([p.omega]))
    if not np.isfinite(K[0]):
        raise SingularParam(f"fundamental forms degenerate at (eta={p.eta}, omega={p.omega})")
    return float(K[0])


def _log_offsets(patch: float, n: int = 4) -> np.ndarray:
    """Symmetric offsets, log-spaced from the kink exclusion band to patch.

    Log spacing reaches the near-kink parameters that map onto the flat
    faces of small-exponent shapes; a linear grid would only sample the
    curved outskirts of the patch.
    """
    band = 1.5 * KINK_BAND
    if patch <= band:
        return np.array([patch, -patch])
    mags = np.geomspace(band, patch, n)
    return np.concatenate([mags, -mags])


def _patch_grid(sq: Superquadric, eta0: float, omega0: float, patch: float):
    """Valid (eta, omega) grid covering a patch around a surface parameter."""
    if abs(eta0) >= np.pi / 2 - 1e-6:
        sgn = 1.0 if eta0 > 0 else -1.0
        mags = np.geomspace(1.5 * POLE_BAND, min(patch, np.pi / 2 - 1.5 * POLE_BAND), 4)
        etas = sgn * (np.pi / 2 - mags)
        omegas = -np.pi + (np.arange(12) + 0.5) * (2 * np.pi / 12)
    else:
        etas = np.clip(eta0 + _log_offsets(patch),
                       -np.pi / 2 + 1.5 * POLE_BAND, np.pi / 2 - 1.5 * POLE_BAND)
        omegas = omega0 + _log_offsets(patch)
        omegas = np.mod(omegas + np.pi, 2 * np.pi) - np.pi
    ee, ww = np.meshgrid(etas, omegas, indexing="ij")
    ee, ww = ee.ravel(), ww.ravel()
    ok = np.array([not is_singular_param(sq, e, w) for e, w in zip(ee, ww)])
    return ee[ok], ww[ok]


def patch_mean_curvature(sq: Superquadric, eta0: float, omega0: float,
                         patch_angle: float) -> float:
    """Area-weighted mean Gaussian curvature over the patch around one param.

    Weighting by the area element |r_eta x r_omega| makes this a surface
    average; grid parameters all carry equal area only on round shapes.
    Raises EmptyPatch when no valid grid parameter survives even after
    widening the patch.
    """
    patch = patch_angle
    for _ in range(6):
        ee, ww = _patch_grid(sq, eta0, omega0, patch)
        if len(ee):
            K, w = _curvatures_batch(sq, ee, ww)
            good = np.isfinite(K) & np.isfinite(w) & (w > 0)
            if np.any(good):
                return float(np.sum(K[good] * w[good]) / np.sum(w[good]))
        patch = min(patch * 2.0, np.pi / 2)
    raise EmptyPatch(f"no valid curvature parameters near (eta={eta0}, omega={omega0})")


_AXIS_ENDPOINT_PARAMS = {
    "x": ((0.0, 0.0), (0.0, np.pi)),
    "y": ((0.0, np.pi / 2), (0.0, -np.pi / 2)),
    "z": ((np.pi / 2, 0.0), (-np.pi / 2, 0.0)),
}


def avg_endpoint_curvature(sq: Superquadric, axis: str, patch_angle: float) -> float:
    """Mean Gaussian curvature over patches at both endpoints of an axis.

    Both endpoints contribute equal weight; singular grid parameters are
    skipped. patch_angle must be in (0, pi/4].
    """
    if not (0 < patch_angle <= np.pi / 4):
        raise ValueError("patch_angle must be in (0, pi/4]")
    if axis not in _AXIS_ENDPOINT_PARAMS:
        raise ValueError(f"axis must be one of x, y, z: {axis}")
    means = []
    for eta0, om0 in _AXIS_ENDPOINT_PARAMS[axis]:
        try:
            means.append(patch_mean_curvature(sq, eta0, om0, patch_angle))
        except EmptyPatch:
            continue
    if not means:
        raise EmptyPatch(f"both endpoint patches empty for axis {axis}")
    return float(np.mean(means))


def param_of_point(sq: Superquadric, x) -> SurfaceParam:
    """Invert the parameterization for a (near-)surface world point."""
    q = sq.to_canonical(np.asarray(x, dtype=float))
    e1, e2 = sq.eps1, sq.eps2
    uy = signed_pow(q[1] / sq.ay, 1.0 / e2)
    ux = signed_pow(q[0] / sq.ax, 1.0 / e2)
    omega = float(np.arctan2(uy, ux))
    cw = np.abs(np.cos(omega)) ** e2
    sw = np.abs(np.sin(omega)) ** e2
    if cw >= sw:
        ce = np.abs(q[0]) / (sq.ax * max(cw, 1e-300))
    else:
        ce = np.abs(q[1]) / (sq.ay * max(sw, 1e-300))
    se = signed_pow(q[2] / sq.az, 1.0 / e1)
    eta = float(np.arctan2(se, max(ce, 0.0) ** (1.0 / e1)))
    eta = float(np.clip(eta, -np.pi / 2, np.pi / 2))
    return SurfaceParam(eta, omega)


# ---------------------------------------------------------------------------
# endpoints, symmetry, classification

_AXIS_UNIT = {"x": np.array([1.0, 0, 0]), "y": np.array([0, 1.0, 0]), "z": np.array([0, 0, 1.0])}


def principal_axis_endpoints(sq: Superquadric, axis: str):
    """World-frame endpoint pair (+a, -a) of one principal axis."""
    u = _AXIS_UNIT[axis] * {"x": sq.ax, "y": sq.ay, "z": sq.az}[axis]
    return sq.to_world(u), sq.to_world(-u)


def symmetry_transforms(sq: Superquadric):
    """The four world-frame rigid transforms mapping the surface onto itself.

    These realize {I, Rx(pi), Ry(pi), Rz(pi)} about the principal axes
    through the superquadric center (the Klein four-group).
    """
    R, t = sq.rotation, sq.translation
    out = []
    for F in geom.FLIP_MATS:
        A = R @ F @ R.T
        out.append(geom.make_pose(A, t - A @ t))
    return out


def swap_xy_representation(sq: Superquadric) -> Superquadric:
    """The equivalent parameter vector with the x and y roles exchanged.

    Swapping ax with ay while rotating the canonical frame a quarter turn
    about z reproduces the identical surface for every exponent pair; the
    parameterization is never identifiable past this relabeling.
    """
    R = sq.rotation @ geom.rot_z(np.pi / 2)
    return Superquadric(sq.eps1, sq.eps2, sq.ay, sq.ax, sq.az,
                        geom.make_pose(R, sq.translation))


def canonical_representation(sq: Superquadric) -> Superquadric:
    """Representative with ax >= ay, unique up to the flip group."""
    return sq if sq.ax >= sq.ay else swap_xy_representation(sq)


def classify_shape(sq: Superquadric, eps_small: float = 0.3,
                   circ_tol: float = 0.1) -> ShapeClass:
    """Classify near-degenerate shapes that admit extra closing lines."""
    if not (0 < eps_small < 1 and 0 < circ_tol < 1):
        raise ValueError("thresholds must be in (0, 1)")
    e1s = sq.eps1 <= eps_small
    e2s = sq.eps2 <= eps_small
    circ = (abs(sq.eps2 - 1.0) <= circ_tol
            and abs(sq.ax - sq.ay) / max(sq.ax, sq.ay) <= circ_tol)
    if e1s and e2s:
        kind = "cuboid"
    elif e1s and circ:
        kind = "cylinder"
    elif e1s:
        kind = "prism"
    elif e2s:
        kind = "rect_base"
    elif circ:
        kind = "circ_base"
    else:
        kind = "generic"
    return ShapeClass(kind, e1s, e2s, circ)
