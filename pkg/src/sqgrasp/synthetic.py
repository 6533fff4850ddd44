"""Synthetic scenes with ground truth, cloud degradation, and a geometric
grasp oracle: antipodal contacts inside a friction cone plus no gripper
penetration, the standard sufficient condition for force closure."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import geom
from . import superquadric as sqm
from .cloud import PointCloud
from .errors import NoContact
from .superquadric import Superquadric
from .synthesis import GraspCandidate, GripperModel, gripper_boxes

TABLE_LABEL = -1
OUTLIER_LABEL = -2

_UNION_TOL = 1e-6


@dataclass(frozen=True)
class SceneObject:
    """One object: the union of 1-3 superquadric components."""

    components: tuple

    def __post_init__(self):
        if not (1 <= len(self.components) <= 3):
            raise ValueError("an object is a union of 1-3 components")
        object.__setattr__(self, "components", tuple(self.components))


@dataclass(frozen=True)
class SceneSpec:
    """Ground-truth scene description with degradation settings."""

    objects: tuple
    table: bool = False
    points_per_component: int = 1200
    noise_sigma: float = 0.0
    outlier_fraction: float = 0.0
    viewpoints: tuple = ()
    rng_seed: int = 0

    def __post_init__(self):
        if self.points_per_component <= 0:
            raise ValueError("points_per_component must be positive")
        if not (0.0 <= self.outlier_fraction < 1.0):
            raise ValueError("outlier_fraction must be in [0, 1)")
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "viewpoints",
                           tuple(tuple(float(x) for x in v) for v in self.viewpoints))

    def all_components(self):
        return [c for obj in self.objects for c in obj.components]

    def component_object_index(self):
        out = []
        for oi, obj in enumerate(self.objects):
            out += [oi] * len(obj.components)
        return out

    def to_json(self) -> dict:
        return {
            "objects": [[c.to_json() for c in o.components] for o in self.objects],
            "table": self.table,
            "points_per_component": self.points_per_component,
            "noise_sigma": self.noise_sigma,
            "outlier_fraction": self.outlier_fraction,
            "viewpoints": [list(v) for v in self.viewpoints],
            "rng_seed": self.rng_seed,
        }

    @staticmethod
    def from_json(obj: dict) -> "SceneSpec":
        objects = tuple(SceneObject(tuple(Superquadric.from_json(c) for c in comps))
                        for comps in obj["objects"])
        return SceneSpec(objects, obj["table"], obj["points_per_component"],
                         obj["noise_sigma"], obj["outlier_fraction"],
                         tuple(tuple(v) for v in obj["viewpoints"]), obj["rng_seed"])


@dataclass(frozen=True)
class OracleParams:
    """Friction cone half-angle and contact search tolerance."""

    friction_half_angle: float = float(np.arctan(0.5))
    contact_tol: float = 1e-7

    def __post_init__(self):
        if self.friction_half_angle <= 0 or self.contact_tol <= 0:
            raise ValueError("oracle parameters must be positive")


def save_scene_specs(specs, path) -> None:
    with open(path, "w") as f:
        json.dump([s.to_json() for s in specs], f, indent=1)


def load_scene_specs(path):
    with open(path) as f:
        return [SceneSpec.from_json(o) for o in json.load(f)]


# ---------------------------------------------------------------------------
# scene generation

def _interior_to_other(pts: np.ndarray, components, skip: int) -> np.ndarray:
    inside = np.zeros(len(pts), dtype=bool)
    for j, comp in enumerate(components):
        if j == skip:
            continue
        inside |= sqm.implicit_value(comp, pts) < 1.0 - _UNION_TOL
    return inside


def generate_scene(spec: SceneSpec):
    """Sample the scene's union surface with the requested degradations.

    Returns (cloud, labels): label = component index, -1 for table points,
    -2 for outliers. Outlier count is exactly
    round(outlier_fraction * base_point_count).
    """
    rng = np.random.default_rng(spec.rng_seed)
    components = spec.all_components()
    parts, labels = [], []
    for ci, comp in enumerate(components):
        pts = np.array(sqm.sample_surface(comp, spec.points_per_component))
        keep = ~_interior_to_other(pts, components, ci)
        parts.append(pts[keep])
        labels.append(np.full(int(np.sum(keep)), ci, dtype=int))

    if spec.table:
        lo = np.min([p.min(axis=0) for p in parts], axis=0)
        hi = np.max([p.max(axis=0) for p in parts], axis=0)
        margin = 0.3 * max(np.max(hi - lo), 0.05)
        xs = np.arange(lo[0] - margin, hi[0] + margin, 0.005)
        ys = np.arange(lo[1] - margin, hi[1] + margin, 0.005)
        gx, gy = np.meshgrid(xs, ys)
        table = np.column_stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)])
        parts.append(table)
        labels.append(np.full(len(table), TABLE_LABEL, dtype=int))

    base = np.vstack(parts)
    labels = np.concatenate(labels)
    if spec.noise_sigma > 0:
        base = base + rng.normal(0.0, spec.noise_sigma, size=base.shape)

    n_out = int(round(spec.outlier_fraction * len(base)))
    if n_out > 0:
        lo, hi = base.min(axis=0), base.max(axis=0)
        c, ext = (lo + hi) / 2.0, np.maximum(hi - lo, 1e-3)
        lo2, hi2 = c - 0.75 * ext, c + 0.75 * ext  # 1.5x workspace
        outliers = rng.uniform(lo2, hi2, size=(n_out, 3))
        base = np.vstack([base, outliers])
        labels = np.concatenate([labels, np.full(n_out, OUTLIER_LABEL, dtype=int)])
    return PointCloud(base), labels


def render_partial(cloud: PointCloud, labels: np.ndarray, components,
                   viewpoints, penetration_tol: float = 0.002,
                   n_ray_samples: int = 64):
    """Keep points visible from at least one viewpoint.

    Visibility is ray-cast against the analytic ground truth: a point is
    blocked from a viewpoint when the segment toward it penetrates deeper
    than penetration_tol into any component before (3 mm short of) arriving.
    """
    if len(viewpoints) == 0:
        raise ValueError("need at least one viewpoint")
    pts = cloud.points
    visible = np.zeros(len(pts), dtype=bool)
    for vp in viewpoints:
        vp = np.asarray(vp, dtype=float)
        seg = pts - vp
        seg_len = np.linalg.norm(seg, axis=1)
        t1 = np.maximum(1.0 - 3e-3 / np.maximum(seg_len, 1e-9), 0.0)
        t0 = np.minimum(1e-3 / np.maximum(seg_len, 1e-9), t1)
        ts = t0[:, None] + (t1 - t0)[:, None] * np.linspace(0.0, 1.0, n_ray_samples)
        samples = vp + ts[..., None] * seg[:, None, :]
        blocked = np.zeros(len(pts), dtype=bool)
        flat = samples.reshape(-1, 3)
        for comp in components:
            depth = _interior_depth(comp, flat).reshape(len(pts), n_ray_samples)
            blocked |= np.any(depth > penetration_tol, axis=1)
        visible |= ~blocked
    return cloud.select(visible), labels[visible]


def _interior_depth(comp: Superquadric, pts: np.ndarray) -> np.ndarray:
    """Radial penetration depth for points inside a component, else 0."""
    q = comp.to_canonical(pts)
    r = np.linalg.norm(q, axis=-1)
    lf = sqm._log_implicit_canonical(comp.eps1, comp.eps2, comp.ax, comp.ay,
                                     comp.az, q)
    beta = np.exp(-0.5 * comp.eps1 * lf)
    depth = r * (beta - 1.0)
    center = ~np.isfinite(beta)
    if np.any(center):
        depth[center] = np.min([comp.ax, comp.ay, comp.az])
    return np.maximum(depth, 0.0)


# ---------------------------------------------------------------------------
# grasp oracle

def _union_crossings(components, p0: np.ndarray, d: np.ndarray, s_lo: float,
                     s_hi: float, tol: float):
    """Union-surface crossings of the line p0 + s*d, as (s, component) pairs."""
    ss = np.linspace(s_lo, s_hi, 512)
    pts = p0 + ss[:, None] * d
    crossings = []
    for ci, comp in enumerate(components):
        f = sqm.implicit_value(comp, pts) - 1.0
        sign_change = np.nonzero(f[:-1] * f[1:] < 0)[0]
        for i in sign_change:
            a, b = ss[i], ss[i + 1]
            fa = f[i]
            while b - a > tol:
                m = 0.5 * (a + b)
                fm = sqm.implicit_value(comp, p0 + m * d) - 1.0
                if fa * fm <= 0:
                    b = m
                else:
                    a, fa = m, fm
            s = 0.5 * (a + b)
            x = p0 + s * d
            others = [c for j, c in enumerate(components) if j != ci]
            if others and any(sqm.implicit_value(c, x) < 1.0 - _UNION_TOL
                              for c in others):
                continue  # interior to the union, not a boundary contact
            crossings.append((s, ci))
    return sorted(crossings)


def oracle_detail(grasp: GraspCandidate, components, op: OracleParams,
                  gripper: GripperModel) -> dict:
    """Full oracle evaluation; see antipodal_oracle for the pass criterion."""
    line = grasp.closing_line
    p0, d = line.center, line.direction
    half_span = gripper.max_width / 2.0
    crossings = _union_crossings(components, p0, d, -half_span, half_span,
                                 op.contact_tol)
    if len(crossings) < 2:
        raise NoContact("closing line does not cross the ground-truth surface twice")
    (s_min, c_min), (s_max, c_max) = crossings[0], crossings[-1]

    info = {"contacts": [(s_min, c_min), (s_max, c_max)], "antipodal": False,
            "penetration_free": True}
    ok = True
    for s, ci, inward in ((s_max, c_max, -1.0), (s_min, c_min, 1.0)):
        x = p0 + s * d
        n = sqm.surface_normals(components[ci], x)
        # outward normal must oppose the inward closing direction within the cone
        cosang = float(np.dot(n, -inward * d))
        if cosang < np.cos(op.friction_half_angle):
            ok = False
    info["antipodal"] = ok

    # gripper sweep must not penetrate the true geometry beyond the contacts
    Rg, tg = grasp.pose[:3, :3], grasp.pose[:3, 3]
    outer = max(abs(s_min), abs(s_max)) + 1e-3
    boxes = gripper_boxes(grasp, gripper, margin=0.0, contact_half_extent=outer)
    for ci, comp in enumerate(components):
        pts = sqm.sample_surface(comp, 1000)
        if _interior_to_other(pts, components, ci).any():
            pts = pts[~_interior_to_other(pts, components, ci)]
        local = (pts - tg) @ Rg
        for lo, hi in boxes:
            lo, hi = np.asarray(lo), np.asarray(hi)
            if np.any(np.all((local >= lo) & (local <= hi), axis=1)):
                info["penetration_free"] = False
                break
        if not info["penetration_free"]:
            break
    info["passed"] = info["antipodal"] and info["penetration_free"]
    return info


def antipodal_oracle(grasp: GraspCandidate, truth, op: OracleParams,
                     gripper: GripperModel) -> bool:
    """True when both contacts are antipodal within the friction cone and the
    posed gripper does not penetrate the ground-truth geometry.

    truth may be a SceneSpec or a list of ground-truth components. Raises
    NoContact when the closing line misses the geometry.
    """
    components = truth.all_components() if isinstance(truth, SceneSpec) else list(truth)
    return oracle_detail(grasp, components, op, gripper)["passed"]


# ---------------------------------------------------------------------------
# randomized scene construction

def random_superquadric(rng: np.random.Generator, axis_range=(0.015, 0.05),
                        eps_range=(0.2, 1.6), center=(0.0, 0.0, 0.0),
                        max_graspable: float | None = 0.036) -> Superquadric:
    """A random component; if max_graspable is set, at least one semi-axis is
    capped so a parallel gripper of that half-width can close on it."""
    axes = rng.uniform(*axis_range, size=3)
    if max_graspable is not None and np.min(axes) > max_graspable:
        axes[rng.integers(3)] = rng.uniform(axis_range[0], max_graspable)
    e1, e2 = rng.uniform(*eps_range, size=2)
    R = geom.matrix_from_rotvec(rng.normal(size=3))
    return Superquadric(e1, e2, *axes, geom.make_pose(R, np.asarray(center, dtype=float)))


def random_object(rng: np.random.Generator, n_components: int,
                  center=(0.0, 0.0, 0.0), **kwargs) -> SceneObject:
    """An object built from overlapping random components around a center."""
    center = np.asarray(center, dtype=float)
    comps = [random_superquadric(rng, center=center, **kwargs)]
    for _ in range(n_components - 1):
        base = comps[0]
        offset = rng.uniform(-0.6, 0.6, size=3) * base.semi_axes
        comps.append(random_superquadric(rng, center=center + base.rotation @ offset,
                                         **kwargs))
    return SceneObject(tuple(comps))


def two_view_viewpoints(center=(0.0, 0.0, 0.0), distance: float = 0.6,
                        elevation: float = 0.35):
    """Two opposing elevated viewpoints, mimicking fixed dual depth sensors."""
    c = np.asarray(center, dtype=float)
    return (tuple(c + [distance, 0.0, distance * elevation]),
            tuple(c + [-distance, 0.0, distance * elevation]))
