"""Antipodal grasp candidate generation and feasibility filtering.

Every recovered superquadric contributes closing lines: always the three
principal axes, plus extra families when the shape degenerates (prism-like
shapes admit shifted lines along z and a grid of vertical lines over the
base; rectangular bases admit lines shifted sideways; circular bases admit
lines at every azimuth). Each line is expanded into gripper poses by rolling
about it, then poses lacking point support at the contacts or colliding with
the cloud are eliminated.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import geom
from .cloud import PointCloud
from .superquadric import ShapeClass, Superquadric, classify_shape

LINE_DEDUP_TOL = 1e-6
COLLISION_MARGIN = 0.002
MIN_HALF_EXTENT = 1e-5


@dataclass(frozen=True)
class GripperModel:
    """Parallel-jaw gripper: jaw length, max opening, finger and body boxes."""

    jaw_length: float = 0.05
    max_width: float = 0.08
    finger_thickness: float = 0.01
    body_extents: tuple = (0.14, 0.05, 0.06)

    def __post_init__(self):
        if self.jaw_length <= 0 or self.max_width <= 0:
            raise ValueError("jaw_length and max_width must be positive")

    def to_json(self) -> dict:
        return {
            "jaw_length": self.jaw_length,
            "max_width": self.max_width,
            "finger_thickness": self.finger_thickness,
            "body_extents": list(self.body_extents),
        }

    @staticmethod
    def from_json(obj: dict) -> "GripperModel":
        return GripperModel(obj["jaw_length"], obj["max_width"],
                            obj["finger_thickness"], tuple(obj["body_extents"]))


@dataclass(frozen=True)
class ClosingLine:
    """Segment along which the jaws close: center, unit direction, half extent.

    ref_dir fixes the zero-roll gripper orientation; it is built in the
    source superquadric's canonical frame so symmetry transforms of the
    shape map candidate sets onto each other exactly.
    """

    center: np.ndarray
    direction: np.ndarray
    half_extent: float
    family: str
    ref_dir: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        d = np.asarray(self.direction, dtype=float)
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise ValueError("direction must be unit length")
        if self.half_extent <= 0:
            raise ValueError("half_extent must be positive")
        c.flags.writeable = False
        d.flags.writeable = False
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "direction", d)
        if self.ref_dir is not None:
            r = np.asarray(self.ref_dir, dtype=float)
            r.flags.writeable = False
            object.__setattr__(self, "ref_dir", r)

    def contacts(self):
        return (self.center + self.half_extent * self.direction,
                self.center - self.half_extent * self.direction)


@dataclass(frozen=True)
class FilterParams:
    """Support/collision test dimensions and candidate sampling intervals."""

    support_cyl_radius: float = 0.008
    support_cyl_height: float = 0.016
    support_min_points: int = 15
    rotation_step: float = np.radians(10.0)
    translation_step: float = 0.015
    circ_rotation_step: float = np.pi / 8
    grid_step: float = 0.015

    def __post_init__(self):
        for name in ("support_cyl_radius", "support_cyl_height", "rotation_step",
                     "translation_step", "circ_rotation_step", "grid_step"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.support_min_points < 0:
            raise ValueError("support_min_points must be >= 0")


@dataclass(frozen=True)
class GraspCandidate:
    """6-DoF gripper pose: closing point at the origin, closing line along +x."""

    pose: np.ndarray
    closing_line: ClosingLine
    source_sq_index: int
    roll_angle: float
    line_ordinal: int = 0
    score: "object" = None

    def __post_init__(self):
        pose = np.asarray(self.pose, dtype=float)
        pose.flags.writeable = False
        object.__setattr__(self, "pose", pose)

    @property
    def width(self) -> float:
        return 2.0 * self.closing_line.half_extent

    @property
    def closing_point(self) -> np.ndarray:
        return self.pose[:3, 3]

    def to_json(self) -> dict:
        q = geom.quat_wxyz_from_matrix(self.pose[:3, :3])
        out = {
            "position": [float(v) for v in self.pose[:3, 3]],
            "quaternion": [float(v) for v in q],
            "width_m": float(self.width),
            "family": self.closing_line.family,
            "source_sq_index": int(self.source_sq_index),
            "roll_deg": float(np.degrees(self.roll_angle)),
        }
        if self.score is not None:
            out["scores"] = self.score.to_json()
        return out


# ---------------------------------------------------------------------------
# closing line generation (canonical frame, then mapped by the pose)

def _half_extent_x_at_z(sq: Superquadric, z0: float) -> float:
    t = 1.0 - np.abs(z0 / sq.az) ** (2.0 / sq.eps1)
    return sq.ax * max(t, 0.0) ** (sq.eps1 / 2.0)


def _half_extent_y_at_z(sq: Superquadric, z0: float) -> float:
    t = 1.0 - np.abs(z0 / sq.az) ** (2.0 / sq.eps1)
    return sq.ay * max(t, 0.0) ** (sq.eps1 / 2.0)


def _half_extent_x_at_y(sq: Superquadric, y0: float) -> float:
    t = 1.0 - np.abs(y0 / sq.ay) ** (2.0 / sq.eps2)
    return sq.ax * max(t, 0.0) ** (sq.eps2 / 2.0)


def _half_extent_y_at_x(sq: Superquadric, x0: float) -> float:
    t = 1.0 - np.abs(x0 / sq.ax) ** (2.0 / sq.eps2)
    return sq.ay * max(t, 0.0) ** (sq.eps2 / 2.0)


def _base_implicit_2d(sq: Superquadric, gx: float, gy: float) -> float:
    return (np.abs(gx / sq.ax) ** (2.0 / sq.eps2)
            + np.abs(gy / sq.ay) ** (2.0 / sq.eps2))

def _half_extent_z_at_xy(sq: Superquadric, gx: float, gy: float) -> float:
    t = 1.0 - _base_implicit_2d(sq, gx, gy) ** (sq.eps2 / sq.eps1)
    return sq.az * max(t, 0.0) ** (sq.eps1 / 2.0)


def _radius_at_azimuth(sq: Superquadric, phi: float) -> float:
    d = np.array([np.cos(phi), np.sin(phi), 0.0])
    g = (np.abs(d[0] / sq.ax) ** (2.0 / sq.eps2)
         + np.abs(d[1] / sq.ay) ** (2.0 / sq.eps2))
    return g ** (-sq.eps2 / 2.0)


def _symmetric_offsets(limit: float, step: float) -> np.ndarray:
    """Multiples of step strictly inside (-limit, limit), including 0."""
    kmax = int(np.floor(limit / step))
    if kmax * step >= limit:
        kmax -= 1
    return np.arange(-kmax, kmax + 1) * step


_E = np.eye(3)


def _canonical_ref(direction: np.ndarray) -> np.ndarray:
    return geom.orthonormal_to(direction)


def closing_lines_for(sq: Superquadric, cls: ShapeClass, fp: FilterParams,
                      gripper: GripperModel):
    """All closing lines for one superquadric, world frame, deduplicated.

    Lines requiring an opening wider than the gripper are dropped at
    creation. Duplicate lines (e.g. azimuth 0 repeating the x axis) are
    removed by center/direction agreement at 1e-6.
    """
    lw = gripper.max_width
    raw = []  # (center_canonical, dir_canonical, half_extent, family)

    for axis, half in zip(range(3), sq.semi_axes):
        raw.append((np.zeros(3), _E[axis], float(half),
                    ("AxisX", "AxisY", "AxisZ")[axis]))

    if cls.is_eps1_small:
        for z0 in _symmetric_offsets(sq.az, fp.translation_step):
            raw.append((np.array([0, 0, z0]), _E[0],
                        _half_extent_x_at_z(sq, z0), "PrismShiftX"))
            raw.append((np.array([0, 0, z0]), _E[1],
                        _half_extent_y_at_z(sq, z0), "PrismShiftY"))
        xs = _symmetric_offsets(sq.ax, fp.grid_step)
        ys = _symmetric_offsets(sq.ay, fp.grid_step)
        for gx in xs:
            for gy in ys:
                if _base_implicit_2d(sq, gx, gy) < 1.0:
                    raw.append((np.array([gx, gy, 0.0]), _E[2],
                                _half_extent_z_at_xy(sq, gx, gy), "BaseGridZ"))

    if cls.is_eps2_small:
        for y0 in _symmetric_offsets(sq.ay, fp.translation_step):
            raw.append((np.array([0, y0, 0.0]), _E[0],
                        _half_extent_x_at_y(sq, y0), "RectShiftX"))
        for x0 in _symmetric_offsets(sq.ax, fp.translation_step):
            raw.append((np.array([x0, 0, 0.0]), _E[1],
                        _half_extent_y_at_x(sq, x0), "RectShiftY"))

    if cls.is_circular:
        n_phi = int(round(np.pi / fp.circ_rotation_step))
        for k in range(max(n_phi, 1)):
            phi = k * fp.circ_rotation_step
            if phi >= np.pi - 1e-12:
                break
            d = np.array([np.cos(phi), np.sin(phi), 0.0])
            raw.append((np.zeros(3), d, _radius_at_azimuth(sq, phi), "CircRotZ"))

    lines, seen = [], []
    R, t = sq.rotation, sq.translation
    for center_c, dir_c, half, family in raw:
        if not (np.isfinite(half) and half > MIN_HALF_EXTENT):
            continue
        if 2.0 * half > lw:
            continue
        canon_dir = dir_c if _first_nonzero_positive(dir_c) else -dir_c
        key = np.concatenate([center_c, canon_dir])
        if any(np.max(np.abs(key - s)) <= LINE_DEDUP_TOL for s in seen):
            continue
        seen.append(key)
        ref_c = _canonical_ref(dir_c)
        lines.append(ClosingLine(R @ center_c + t, R @ dir_c, half, family,
                                 ref_dir=R @ ref_c))
    return lines


def _first_nonzero_positive(v: np.ndarray) -> bool:
    for x in v:
        if abs(x) > 1e-12:
            return x > 0
    return True


# ---------------------------------------------------------------------------
# roll expansion

def rotations_about_line(line: ClosingLine, fp: FilterParams):
    """Gripper poses rolled about the closing line over [0, pi).

    A parallel gripper is symmetric under a half-turn roll, so [0, pi)
    covers every distinct placement; 10 degree steps give 18 poses.
    """
    ratio = np.pi / fp.rotation_step
    count = int(round(ratio)) if abs(ratio - round(ratio)) < 1e-9 else int(np.floor(ratio))
    count = max(count, 1)
    d = line.direction
    r0 = line.ref_dir if line.ref_dir is not None else geom.orthonormal_to(d)
    r0 = r0 - np.dot(r0, d) * d
    r0 = r0 / np.linalg.norm(r0)
    cross = np.cross(d, r0)
    out = []
    for k in range(count):
        roll = k * fp.rotation_step
        z_g = np.cos(roll) * r0 + np.sin(roll) * cross
        y_g = np.cross(z_g, d)
        R = np.column_stack([d, y_g, z_g])
        out.append(GraspCandidate(geom.make_pose(R, line.center), line,
                                  source_sq_index=0, roll_angle=roll))
    return out


def synthesize_candidates(results, fp: FilterParams, gripper: GripperModel):
    """Candidate poses for every recovery result, in deterministic order."""
    cands = []
    for src, result in enumerate(results):
        cls = classify_shape(result.sq)
        for ordinal, line in enumerate(closing_lines_for(result.sq, cls, fp, gripper)):
            for cand in rotations_about_line(line, fp):
                cands.append(replace(cand, source_sq_index=src, line_ordinal=ordinal))
    return cands


# ---------------------------------------------------------------------------
# feasibility filters

def _count_in_cylinder(pts, center, axis, radius, height) -> int:
    rel = pts - center
    s = rel @ axis
    perp2 = np.einsum("ij,ij->i", rel, rel) - s * s
    return int(np.sum((np.abs(s) <= height / 2.0) & (perp2 <= radius * radius)))


def support_check(cand: GraspCandidate, cloud: PointCloud, fp: FilterParams) -> bool:
    """Require enough cloud points inside a small cylinder at both contacts."""
    line = cand.closing_line
    for c in line.contacts():
        n = _count_in_cylinder(cloud.points, c, line.direction,
                               fp.support_cyl_radius, fp.support_cyl_height)
        if n < fp.support_min_points:
            return False
    return True


def gripper_boxes(cand: GraspCandidate, gripper: GripperModel, margin: float = 0.0,
                  contact_half_extent: float | None = None):
    """Swept-volume boxes (two closing fingers, palm) in the gripper frame."""
    lj, lw, ft = gripper.jaw_length, gripper.max_width, gripper.finger_thickness
    bx, by, bz = gripper.body_extents
    h = cand.closing_line.half_extent if contact_half_extent is None else contact_half_extent
    m = margin
    return [
        ((h - m, -ft / 2 - m, -lj - m), (lw / 2 + ft + m, ft / 2 + m, m)),
        ((-lw / 2 - ft - m, -ft / 2 - m, -lj - m), (-h + m, ft / 2 + m, m)),
        ((-bx / 2 - m, -by / 2 - m, -lj - bz - m), (bx / 2 + m, by / 2 + m, -lj + m)),
    ]


def _any_point_in_boxes(pts_gripper: np.ndarray, boxes) -> bool:
    for lo, hi in boxes:
        lo = np.asarray(lo)
        hi = np.asarray(hi)
        inside = np.all((pts_gripper >= lo) & (pts_gripper <= hi), axis=1)
        if np.any(inside):
            return True
    return False


def collision_colliders(line: ClosingLine, cloud: PointCloud, sq: Superquadric,
                        gripper: GripperModel) -> np.ndarray:
    """Potential collision points for one closing line.

    A screening cylinder of radius jaw_length and height min(contact half
    extent, max_width/2), centered at the superquadric centroid with its
    axis along the closing line, marks the graspable bulk; cloud points
    between its base planes but outside its radius can hit the gripper.
    """
    if len(cloud) == 0:
        return cloud.points
    H = min(line.half_extent, gripper.max_width / 2.0)
    rel = cloud.points - sq.translation
    s = rel @ line.direction
    perp2 = np.einsum("ij,ij->i", rel, rel) - s * s
    mask = (np.abs(s) <= H / 2.0) & (perp2 > gripper.jaw_length**2)
    return cloud.points[mask]


def collision_check(cand: GraspCandidate, cloud: PointCloud, sq: Superquadric,
                    gripper: GripperModel) -> bool:
    """True when no potential collider enters the posed gripper sweep.

    Checked with a 2 mm safety margin on the finger/palm boxes.
    """
    colliders = collision_colliders(cand.closing_line, cloud, sq, gripper)
    if len(colliders) == 0:
        return True
    Rg, tg = cand.pose[:3, :3], cand.pose[:3, 3]
    local = (colliders - tg) @ Rg
    return not _any_point_in_boxes(local, gripper_boxes(cand, gripper,
                                                        margin=COLLISION_MARGIN))


def filter_candidates(cands, cloud: PointCloud, results, fp: FilterParams,
                      gripper: GripperModel):
    """Keep candidates passing both support and collision checks.

    Support is roll-invariant and evaluated once per closing line; collider
    sets are likewise shared across the rolls of a line.
    """
    support_cache: dict = {}
    collider_cache: dict = {}
    kept = []
    for cand in cands:
        key = (cand.source_sq_index, cand.line_ordinal)
        if key not in support_cache:
            support_cache[key] = support_check(cand, cloud, fp)
        if not support_cache[key]:
            continue
        sq = results[cand.source_sq_index].sq
        if key not in collider_cache:
            collider_cache[key] = collision_colliders(cand.closing_line, cloud,
                                                      sq, gripper)
        colliders = collider_cache[key]
        if len(colliders):
            Rg, tg = cand.pose[:3, :3], cand.pose[:3, 3]
            local = (colliders - tg) @ Rg
            if _any_point_in_boxes(local, gripper_boxes(cand, gripper,
                                                        margin=COLLISION_MARGIN)):
                continue
        kept.append(cand)
    return kept


def intersects_halfspace_below(cand: GraspCandidate, gripper: GripperModel,
                               plane: np.ndarray, clearance: float = 0.0) -> bool:
    """True when any corner of the gripper sweep dips below a table plane."""
    Rg, tg = cand.pose[:3, :3], cand.pose[:3, 3]
    nrm, d = plane[:3], plane[3]
    for lo, hi in gripper_boxes(cand, gripper):
        lo = np.asarray(lo)
        hi = np.asarray(hi)
        for i in range(8):
            corner_local = np.where([(i >> b) & 1 for b in range(3)], hi, lo)
            corner = Rg @ corner_local + tg
            if np.dot(nrm, corner) + d < clearance:
                return True
    return False
