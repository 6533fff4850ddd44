"""Simulated grasp benchmark: per-scene planning, oracle verification, and
the packed-scene removal loop, reported as JSON + CSV."""

from __future__ import annotations

import csv
import json
from dataclasses import replace
from pathlib import Path

import numpy as np

from .cloud import PointCloud
from .errors import NoCandidates, NoContact, NoRecovery, TooFewPoints
from .pipeline import PipelineConfig, plan
from .synthetic import (OracleParams, SceneSpec, generate_scene, oracle_detail,
                        render_partial)

MAX_CONSECUTIVE_FAILURES = 2


def _build_cloud(spec: SceneSpec):
    cloud, labels = generate_scene(spec)
    if spec.viewpoints:
        cloud, labels = render_partial(cloud, labels, spec.all_components(),
                                       spec.viewpoints)
    return cloud, labels


def _strip_labels(cloud: PointCloud, labels, drop) -> tuple:
    keep = ~np.isin(labels, list(drop))
    return cloud.select(keep), labels[keep]


def _plan_top(cloud, cfg, threads):
    """Plan and return (top_candidate, diagnostics, failure_reason)."""
    try:
        res = plan(cloud, cfg, threads=threads)
        return res.grasps[0], res.diagnostics, None
    except (NoRecovery, NoCandidates, TooFewPoints) as exc:
        return None, {}, type(exc).__name__


def _ms(diag, stage):
    return diag.get("timings_ms", {}).get(stage, 0.0)


def _isolated_scene(scene_id, spec, cfg, op, threads):
    cloud, _ = _build_cloud(spec)
    top, diag, why = _plan_top(cloud, cfg, threads)
    success = False
    if top is not None:
        try:
            success = oracle_detail(top, spec.all_components(), op,
                                    cfg.gripper)["passed"]
        except NoContact:
            why = "NoContact"
    return {
        "scene_id": scene_id, "mode": "isolated", "attempts": 1,
        "successes": int(success), "objects_total": len(spec.objects),
        "objects_removed": int(success), "failure": why,
        "ms_recovery": _ms(diag, "recovery"),
        "ms_synthesis": _ms(diag, "synthesis"),
        "ms_scoring": _ms(diag, "scoring"),
        "ms_total": _ms(diag, "total"),
    }


def _packed_scene(scene_id, spec, cfg, op, threads):
    cloud, labels = _build_cloud(spec)
    comp_obj = spec.component_object_index()
    components = spec.all_components()
    remaining = set(range(len(spec.objects)))
    attempts = successes = fail_streak = 0
    ms = {"recovery": 0.0, "synthesis": 0.0, "scoring": 0.0, "total": 0.0}

    while remaining and fail_streak < MAX_CONSECUTIVE_FAILURES:
        top, diag, _ = _plan_top(cloud, cfg, threads)
        for k in ms:
            ms[k] += _ms(diag, k)
        attempts += 1
        grasped_obj = None
        if top is not None:
            try:
                detail = oracle_detail(top, components, op, cfg.gripper)
            except NoContact:
                detail = {"passed": False}
            if detail.get("passed"):
                contact_comp = detail["contacts"][-1][1]
                grasped_obj = comp_obj[contact_comp]
        if grasped_obj is not None and grasped_obj in remaining:
            successes += 1
            fail_streak = 0
            remaining.discard(grasped_obj)
            drop = [ci for ci, oi in enumerate(comp_obj) if oi == grasped_obj]
            cloud, labels = _strip_labels(cloud, labels, drop)
        else:
            fail_streak += 1

    removed = len(spec.objects) - len(remaining)
    return {
        "scene_id": scene_id, "mode": "packed", "attempts": attempts,
        "successes": successes, "objects_total": len(spec.objects),
        "objects_removed": removed, "failure": None,
        "ms_recovery": round(ms["recovery"], 3),
        "ms_synthesis": round(ms["synthesis"], 3),
        "ms_scoring": round(ms["scoring"], 3),
        "ms_total": round(ms["total"], 3),
    }


def run_benchmark(suite, cfg: PipelineConfig, op: OracleParams,
                  threads: int = 1) -> dict:
    """Evaluate every scene; isolated scenes score one attempt each, packed
    scenes run the removal loop until empty or two consecutive failures.

    Returns a report with per-scene records (sorted by scene id), the grasp
    success rate over attempts, and the clearance rate over packed objects.
    """
    records = []
    for scene_id, spec in enumerate(suite):
        runner = _packed_scene if cfg.mode == "packed" else _isolated_scene
        records.append(runner(scene_id, spec, cfg, op, threads))
    records.sort(key=lambda r: r["scene_id"])

    attempts = sum(r["attempts"] for r in records)
    successes = sum(r["successes"] for r in records)
    packed = [r for r in records if r["mode"] == "packed"]
    total_obj = sum(r["objects_total"] for r in packed)
    removed_obj = sum(r["objects_removed"] for r in packed)
    return {
        "mode": cfg.mode,
        "scenes": records,
        "gsr": successes / attempts if attempts else 0.0,
        "cr": removed_obj / total_obj if total_obj else None,
        "config_hash": cfg.config_hash(),
    }


CSV_COLUMNS = ["scene_id", "mode", "attempts", "successes", "gsr", "cr",
               "ms_recovery", "ms_synthesis", "ms_scoring"]


def write_report(report: dict, json_path, csv_path=None) -> None:
    Path(json_path).write_text(json.dumps(report, sort_keys=True, indent=1) + "\n")
    if csv_path is None:
        return
    with open(csv_path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for r in report["scenes"]:
            gsr = r["successes"] / r["attempts"] if r["attempts"] else 0.0
            cr = (r["objects_removed"] / r["objects_total"]
                  if r["mode"] == "packed" else "")
            writer.writerow({
                "scene_id": r["scene_id"], "mode": r["mode"],
                "attempts": r["attempts"], "successes": r["successes"],
                "gsr": gsr, "cr": cr, "ms_recovery": r["ms_recovery"],
                "ms_synthesis": r["ms_synthesis"], "ms_scoring": r["ms_scoring"],
            })
