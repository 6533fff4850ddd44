"""End-to-end planning: preprocessing, recovery, synthesis, scoring, export."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .cloud import PointCloud, remove_tabletop
from .errors import ConfigError, NoCandidates, TooFewPoints
from .recovery import RecoveryParams, RecoveryResult, choose_K, recover_superquadrics
from .scoring import ScoreParams, rank_candidates, score_all
from .synthesis import (FilterParams, GripperModel, filter_candidates,
                        intersects_halfspace_below, synthesize_candidates)
from . import superquadric as sqm

MIN_PLAN_POINTS = 100


@dataclass(frozen=True)
class PipelineConfig:
    """Aggregate configuration for the planner."""

    recovery: RecoveryParams = field(default_factory=RecoveryParams)
    filter: FilterParams = field(default_factory=FilterParams)
    score: ScoreParams = field(default_factory=ScoreParams)
    gripper: GripperModel = field(default_factory=GripperModel)
    mode: str = "isolated"
    rng_seed: int = 0
    plane_removal: bool = False
    plane_dist_tol: float = 0.005
    table_filter: bool = True
    voxel_downsample_size: float = 0.0

    def __post_init__(self):
        if self.mode not in ("isolated", "packed"):
            raise ConfigError(f"mode must be isolated or packed, got {self.mode!r}")

    def to_json(self) -> dict:
        out = asdict(self)
        out["gripper"]["body_extents"] = list(self.gripper.body_extents)
        return out

    @staticmethod
    def from_json(obj: dict) -> "PipelineConfig":
        known = {"recovery": RecoveryParams, "filter": FilterParams,
                 "score": ScoreParams, "gripper": GripperModel}
        scalars = {"mode", "rng_seed", "plane_removal", "plane_dist_tol",
                   "table_filter", "voxel_downsample_size"}
        kwargs = {}
        try:
            for key, val in obj.items():
                if key in known:
                    if not isinstance(val, dict):
                        raise ConfigError(f"section {key!r} must be an object")
                    if key == "gripper" and "body_extents" in val:
                        val = dict(val, body_extents=tuple(val["body_extents"]))
                    kwargs[key] = known[key](**val)
                elif key in scalars:
                    kwargs[key] = val
                else:
                    raise ConfigError(f"unknown config key: {key!r}")
            return PipelineConfig(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def config_hash(self) -> str:
        data = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(data).hexdigest()


@dataclass
class PlanResult:
    grasps: list
    results: list
    diagnostics: dict
    plane: list | None = None


def plan(cloud: PointCloud, cfg: PipelineConfig, threads: int = 1) -> PlanResult:
    """Full planning pass over one cloud.

    Raises TooFewPoints (< 100 points after preprocessing), NoRecovery and
    NoCandidates; diagnostics carry per-stage counts and wall-clock times.
    """
    timings = {}
    diag = {"n_input": len(cloud), "warnings": []}
    t0 = time.perf_counter()

    plane = None
    work = cloud
    if cfg.plane_removal:
        work, info = remove_tabletop(work, cfg.plane_dist_tol, cfg.rng_seed)
        plane = info["plane"]
        if info["warning"]:
            diag["warnings"].append(info["warning"])
    k_override = None
    if cfg.voxel_downsample_size > 0:
        # K keeps the meaning of the raw point count when downsampling.
        k_override = choose_K(len(work))
        from .cloud import voxel_downsample
        work = voxel_downsample(work, cfg.voxel_downsample_size)
    diag["n_object"] = len(work)
    timings["preprocess"] = time.perf_counter() - t0
    if len(work) < MIN_PLAN_POINTS:
        raise TooFewPoints(f"{len(work)} points after preprocessing (need >= 100)")

    t1 = time.perf_counter()
    results = recover_superquadrics(work, cfg.recovery, cfg.rng_seed,
                                    k_override=k_override, threads=threads)
    timings["recovery"] = time.perf_counter() - t1
    diag["n_results"] = len(results)
    diag["per_sq"] = [{"init_index": r.init_index, "alpha": float(r.alpha),
                       "beta": float(r.beta), "n_inliers": int(len(r.inliers))}
                      for r in results]

    t2 = time.perf_counter()
    cands = synthesize_candidates(results, cfg.filter, cfg.gripper)
    diag["n_candidates"] = len(cands)
    timings["synthesis"] = time.perf_counter() - t2

    t3 = time.perf_counter()
    kept = filter_candidates(cands, work, results, cfg.filter, cfg.gripper)
    if plane is not None and cfg.table_filter:
        pl = np.asarray(plane)
        kept = [c for c in kept
                if not intersects_halfspace_below(c, cfg.gripper, pl)]
    diag["n_filtered"] = len(kept)
    timings["filtering"] = time.perf_counter() - t3
    if not kept:
        raise NoCandidates("every candidate was filtered out")

    t4 = time.perf_counter()
    sp = replace(cfg.score, packed_mode=(cfg.mode == "packed"))
    scored = score_all(kept, results, work, sp)
    ranked = rank_candidates(scored)
    timings["scoring"] = time.perf_counter() - t4
    timings["total"] = time.perf_counter() - t0
    diag["timings_ms"] = {k: round(v * 1000.0, 3) for k, v in timings.items()}
    return PlanResult(ranked, results, diag, plane)


# ---------------------------------------------------------------------------
# export

def export_document(plan_result: PlanResult, cfg: PipelineConfig) -> dict:
    return {
        "config_hash": cfg.config_hash(),
        "superquadrics": [r.to_json() for r in plan_result.results],
        "grasps": [g.to_json() for g in plan_result.grasps],
        "diagnostics": plan_result.diagnostics,
    }


def export_grasps(doc_or_result, path, cfg: PipelineConfig | None = None) -> None:
    """Write the grasp document as deterministic JSON."""
    doc = doc_or_result
    if isinstance(doc_or_result, PlanResult):
        if cfg is None:
            raise ValueError("cfg required when exporting a PlanResult")
        doc = export_document(doc_or_result, cfg)
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def import_grasps(path) -> dict:
    return json.loads(Path(path).read_text())


def canonical_export_bytes(doc: dict, include_timings: bool = False) -> bytes:
    """Serialize a grasp/benchmark document for byte-level comparison.

    Timing diagnostics vary run to run and are stripped unless requested.
    """
    def strip(obj):
        if isinstance(obj, dict):
            return {k: strip(v) for k, v in obj.items()
                    if include_timings or not (k == "timings_ms" or k.startswith("ms_"))}
        if isinstance(obj, list):
            return [strip(v) for v in obj]
        return obj

    return json.dumps(strip(doc), sort_keys=True).encode()


# ---------------------------------------------------------------------------
# visualization output

def _write_ply(path, vertices, edges=None) -> None:
    lines = ["ply", "format ascii 1.0", f"element vertex {len(vertices)}",
             "property float x", "property float y", "property float z"]
    if edges is not None:
        lines += [f"element edge {len(edges)}",
                  "property int vertex1", "property int vertex2"]
    lines.append("end_header")
    for v in vertices:
        lines.append(f"{v[0]:.9g} {v[1]:.9g} {v[2]:.9g}")
    if edges is not None:
        for a, b in edges:
            lines.append(f"{a} {b}")
    Path(path).write_text("\n".join(lines) + "\n")


_BOX_EDGES = [(0, 1), (0, 2), (1, 3), (2, 3), (4, 5), (4, 6), (5, 7), (6, 7),
              (0, 4), (1, 5), (2, 6), (3, 7)]


def emit_viz(out_dir, cloud: PointCloud, plan_result: PlanResult,
             cfg: PipelineConfig, max_grasps: int = 5) -> None:
    """Write per-stage geometry as ASCII PLY plus a JSON manifest."""
    from .synthesis import gripper_boxes

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"files": []}

    _write_ply(out / "object_cloud.ply", cloud.points)
    manifest["files"].append({"path": "object_cloud.ply", "stage": "input",
                              "points": len(cloud)})
    for i, r in enumerate(plan_result.results):
        pts = sqm.sample_surface(r.sq, 800)
        name = f"superquadric_{i:02d}.ply"
        _write_ply(out / name, pts)
        manifest["files"].append({"path": name, "stage": "recovery",
                                  "alpha": float(r.alpha), "beta": float(r.beta)})
    for rank, g in enumerate(plan_result.grasps[:max_grasps]):
        verts, edges = [], []
        Rg, tg = g.pose[:3, :3], g.pose[:3, 3]
        for lo, hi in gripper_boxes(g, cfg.gripper):
            base = len(verts)
            lo, hi = np.asarray(lo), np.asarray(hi)
            for i in range(8):
                corner = np.where([(i >> b) & 1 for b in range(3)], hi, lo)
                verts.append(Rg @ corner + tg)
            edges += [(a + base, b + base) for a, b in _BOX_EDGES]
        name = f"grasp_{rank:02d}.ply"
        _write_ply(out / name, verts, edges)
        manifest["files"].append({"path": name, "stage": "grasp", "rank": rank,
                                  "score": float(g.score.h)})
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
