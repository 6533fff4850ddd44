"""Point cloud container, ASCII cloud file IO, fusion and tabletop removal."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import geom
from .errors import LengthMismatch, ParseError, UnsupportedFormat


@dataclass(frozen=True)
class PointCloud:
    """3D points in meters (world frame), optionally tagged by source cloud."""

    points: np.ndarray
    source: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite coordinates")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        if self.source is not None:
            src = np.asarray(self.source, dtype=int)
            if len(src) != len(pts):
                raise LengthMismatch("source tags must match point count")
            src.flags.writeable = False
            object.__setattr__(self, "source", src)

    def __len__(self) -> int:
        return len(self.points)

    def bounds(self):
        if len(self) == 0:
            z = np.zeros(3)
            return z, z
        return self.points.min(axis=0), self.points.max(axis=0)

    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)

    def select(self, mask_or_idx) -> "PointCloud":
        src = None if self.source is None else self.source[mask_or_idx]
        return PointCloud(self.points[mask_or_idx], src)


def _parse_float_row(tokens, lineno):
    try:
        return [float(t) for t in tokens]
    except ValueError as exc:
        raise ParseError(str(exc), line=lineno) from exc


def _load_xyz(lines):
    rows, dropped = [], 0
    for i, raw in enumerate(lines, start=1):
        txt = raw.strip()
        if not txt or txt.startswith("#"):
            continue
        toks = txt.split()
        if len(toks) < 3:
            raise ParseError("expected at least 3 columns", line=i)
        vals = _parse_float_row(toks[:3], i)
        if not all(np.isfinite(vals)):
            dropped += 1
            continue
        rows.append(vals)
    return rows, dropped


def _load_ply(lines):
    if not lines or lines[0].strip() != "ply":
        raise ParseError("missing 'ply' magic", line=1)
    n_vertex = None
    props = []
    header_end = None
    fmt_ok = False
    in_vertex = False
    for i, raw in enumerate(lines[1:], start=2):
        tok = raw.strip().split()
        if not tok:
            continue
        if tok[0] == "format":
            if len(tok) < 2 or tok[1] != "ascii":
                raise UnsupportedFormat(f"ply format {tok[1:]} not supported (ascii only)")
            fmt_ok = True
        elif tok[0] == "element":
            in_vertex = tok[1] == "vertex"
            if in_vertex:
                n_vertex = int(tok[2])
        elif tok[0] == "property" and in_vertex:
            props.append(tok[-1])
        elif tok[0] == "end_header":
            header_end = i
            break
    if header_end is None or n_vertex is None or not fmt_ok:
        raise ParseError("truncated or invalid ply header",
                         line=len(lines) if lines else 1)
    try:
        cols = [props.index(c) for c in ("x", "y", "z")]
    except ValueError as exc:
        raise ParseError("vertex element lacks x/y/z properties", line=header_end) from exc

    rows, dropped = [], 0
    body = lines[header_end:header_end + n_vertex]
    if len(body) < n_vertex:
        raise ParseError(f"expected {n_vertex} vertex rows, found {len(body)}",
                         line=len(lines))
    for j, raw in enumerate(body, start=header_end + 1):
        toks = raw.strip().split()
        if len(toks) < len(props):
            raise ParseError("short vertex row", line=j)
        vals = _parse_float_row([toks[c] for c in cols], j)
        if not all(np.isfinite(vals)):
            dropped += 1
            continue
        rows.append(vals)
    return rows, dropped


def _load_pcd(lines):
    fields = None
    n_points = None
    data_start = None
    for i, raw in enumerate(lines, start=1):
        tok = raw.strip().split()
        if not tok or tok[0].startswith("#"):
            continue
        key = tok[0].upper()
        if key == "FIELDS":
            fields = tok[1:]
        elif key == "POINTS":
            n_points = int(tok[1])
        elif key == "DATA":
            if len(tok) < 2 or tok[1] != "ascii":
                raise UnsupportedFormat("pcd DATA must be ascii")
            data_start = i
            break
    if data_start is None or fields is None or n_points is None:
        raise ParseError("truncated or invalid pcd header",
                         line=len(lines) if lines else 1)
    try:
        cols = [fields.index(c) for c in ("x", "y", "z")]
    except ValueError as exc:
        raise ParseError("pcd FIELDS lacks x/y/z", line=data_start) from exc

    rows, dropped = [], 0
    body = lines[data_start:data_start + n_points]
    if len(body) < n_points:
        raise ParseError(f"expected {n_points} data rows, found {len(body)}",
                         line=len(lines))
    for j, raw in enumerate(body, start=data_start + 1):
        toks = raw.strip().split()
        if len(toks) < len(fields):
            raise ParseError("short data row", line=j)
        vals = _parse_float_row([toks[c] for c in cols], j)
        if not all(np.isfinite(vals)):
            dropped += 1
            continue
        rows.append(vals)
    return rows, dropped


_LOADERS = {"xyz": _load_xyz, "ply": _load_ply, "pcd": _load_pcd}


def load_cloud(path, fmt: str = "auto"):
    """Parse an ASCII cloud file.

    Returns (PointCloud, diagnostics) where diagnostics counts rows dropped
    for non-finite coordinates. Raises ParseError (with line number) on
    malformed content and UnsupportedFormat for unknown formats.
    """
    path = Path(path)
    if fmt == "auto":
        fmt = path.suffix.lstrip(".").lower()
    fmt = {"ply-ascii": "ply", "pcd-ascii": "pcd"}.get(fmt, fmt)
    if fmt not in _LOADERS:
        raise UnsupportedFormat(f"unsupported cloud format: {fmt!r}")
    lines = path.read_text().splitlines()
    rows, dropped = _LOADERS[fmt](lines)
    pts = np.array(rows, dtype=float).reshape(-1, 3)
    return PointCloud(pts), {"dropped_non_finite": dropped, "format": fmt}


def voxel_downsample(cloud: PointCloud, voxel_size: float) -> PointCloud:
    """Replace the points of each occupied voxel by their centroid."""
    if voxel_size <= 0 or len(cloud) == 0:
        return cloud
    keys = np.floor(cloud.points / voxel_size).astype(np.int64)
    order = np.lexsort((keys[:, 2], keys[:, 1], keys[:, 0]))
    keys, pts = keys[order], cloud.points[order]
    boundaries = np.any(np.diff(keys, axis=0) != 0, axis=1)
    starts = np.concatenate([[0], np.nonzero(boundaries)[0] + 1, [len(pts)]])
    cent = np.add.reduceat(pts, starts[:-1], axis=0)
    counts = np.diff(starts)[:, None]
    return PointCloud(cent / counts)


def fuse(clouds, transforms, voxel_size: float = 0.0) -> PointCloud:
    """Concatenate rigidly transformed clouds, tagging points by source index."""
    if len(clouds) != len(transforms):
        raise LengthMismatch(f"{len(clouds)} clouds vs {len(transforms)} transforms")
    parts, tags = [], []
    for i, (c, T) in enumerate(zip(clouds, transforms)):
        parts.append(geom.apply_pose(np.asarray(T, dtype=float), c.points))
        tags.append(np.full(len(c), i, dtype=int))
    pts = np.vstack(parts) if parts else np.zeros((0, 3))
    fused = PointCloud(pts, np.concatenate(tags) if tags else None)
    if voxel_size > 0:
        fused = voxel_downsample(fused, voxel_size)
    return fused


RANSAC_ITERS = 500
MIN_PLANE_FRACTION = 0.20


def remove_tabletop(cloud: PointCloud, dist_tol: float = 0.005, rng_seed: int = 0):
    """Remove the dominant plane (and everything below it) via seeded RANSAC.

    Returns (remaining_cloud, info). When no plane reaches a 20% inlier
    fraction the cloud is returned unchanged with a warning in info.
    """
    if len(cloud) < 50:
        raise ValueError("tabletop removal needs at least 50 points")
    pts = cloud.points
    rng = np.random.default_rng(rng_seed)
    best_count, best_plane = -1, None
    n = len(pts)
    for _ in range(RANSAC_ITERS):
        i, j, k = rng.choice(n, size=3, replace=False)
        v1, v2 = pts[j] - pts[i], pts[k] - pts[i]
        nrm = np.cross(v1, v2)
        mag = np.linalg.norm(nrm)
        if mag < 1e-12:
            continue
        nrm = nrm / mag
        d = -np.dot(nrm, pts[i])
        count = int(np.sum(np.abs(pts @ nrm + d) <= dist_tol))
        if count > best_count:
            best_count, best_plane = count, (nrm, d)

    info = {"plane": None, "removed": 0, "warning": None,
            "inlier_fraction": best_count / n if best_count > 0 else 0.0}
    if best_plane is None or best_count < MIN_PLANE_FRACTION * n:
        info["warning"] = "no dominant plane found; cloud returned unchanged"
        return cloud, info

    nrm, d = best_plane
    signed = pts @ nrm + d
    off = np.abs(signed) > dist_tol
    # Orient the normal toward the object side (majority of off-plane points).
    if np.any(off) and np.mean(signed[off]) < 0:
        nrm, d, signed = -nrm, -d, -signed
    keep = signed > dist_tol
    info["plane"] = [float(v) for v in (*nrm, d)]
    info["removed"] = int(np.sum(~keep))
    return cloud.select(keep), info
