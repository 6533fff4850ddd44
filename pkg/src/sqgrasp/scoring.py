"""Four-factor grasp quality: fit error, coverage, contact curvature, and
distance to the estimated center of mass, combined multiplicatively."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import superquadric as sqm
from .cloud import PointCloud
from .errors import EmptyInput, EmptyPatch
from .recovery import RecoveryResult
from .synthesis import GraspCandidate

# Smallest representable positive double; keeps components in (0, 1] when the
# exponential scores underflow.
_SCORE_FLOOR = 5e-324

_AXIS_FAMILY = {"AxisX": "x", "AxisY": "y", "AxisZ": "z"}


@dataclass(frozen=True)
class ScoreParams:
    """Score hyperparameters. q_alpha/q_gamma/q_delta default to the tuned
    values 0.002 / 0.5 / 0.005; lengths are meters, curvature 1/m^2.

    curvature_scale rescales the raw curvature before scoring (1.0 keeps raw
    SI units, under which q_gamma=0.5 only rewards near-flat contacts).
    """

    q_alpha: float = 0.002
    q_gamma: float = 0.5
    q_delta: float = 0.005
    d_th: float = 0.01
    sample_count: int = 2000
    packed_mode: bool = False
    curvature_scale: float = 1.0
    patch_angle: float = np.pi / 8

    def __post_init__(self):
        if min(self.q_alpha, self.q_gamma, self.q_delta) <= 0:
            raise ValueError("q_* must be positive")
        if self.d_th <= 0:
            raise ValueError("d_th must be positive")


@dataclass(frozen=True)
class ScoreBreakdown:
    """Raw metrics and their component scores; h is the exact product."""

    alpha: float
    beta: float
    gamma: float
    delta: float
    h_alpha: float
    h_beta: float
    h_gamma: float
    h_delta: float
    h: float

    def to_json(self) -> dict:
        return {k: float(getattr(self, k)) for k in
                ("alpha", "beta", "gamma", "delta",
                 "h_alpha", "h_beta", "h_gamma", "h_delta", "h")}


def point_to_surface(Y: np.ndarray, S: np.ndarray) -> float:
    """Mean distance from each point of Y to its nearest surface sample."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    S = np.asarray(S, dtype=float)
    if len(Y) < 1 or len(S) < 100:
        raise EmptyInput(f"need |Y| >= 1 and |S| >= 100, got {len(Y)}, {len(S)}")
    d, _ = cKDTree(S).query(Y)
    return float(np.mean(d))


def coverage_ratio(Y: np.ndarray, S: np.ndarray, d_th: float) -> float:
    """Fraction of surface samples within d_th of some point of Y."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    S = np.asarray(S, dtype=float)
    if len(Y) < 1 or len(S) < 100:
        raise EmptyInput(f"need |Y| >= 1 and |S| >= 100, got {len(Y)}, {len(S)}")
    d, _ = cKDTree(Y).query(S)
    return float(np.sum(d <= d_th) / len(S))


def component_scores(alpha: float, beta: float, gamma: float, delta: float,
                     sp: ScoreParams) -> ScoreBreakdown:
    """Apply the four scoring laws and combine them into h."""
    h_a = max(float(np.exp(-(alpha**2) / sp.q_alpha)), _SCORE_FLOOR)
    h_b = max(float(beta) ** 2, _SCORE_FLOOR)
    h_g = max(float(np.exp(-(gamma**2) / sp.q_gamma)), _SCORE_FLOOR)
    h_d = 1.0 if sp.packed_mode else max(float(np.exp(-(delta**2) / sp.q_delta)),
                                         _SCORE_FLOOR)
    h = max((h_a * h_b * h_g) * h_d, _SCORE_FLOOR)
    return ScoreBreakdown(alpha, beta, gamma, delta, h_a, h_b, h_g, h_d, h)


def contact_curvature(cand: GraspCandidate, sq, patch_angle: float) -> float:
    """Mean Gaussian curvature around the candidate's two contact regions.

    Axis-family candidates use the endpoint patches of their axis; expanded
    families center the patch at the actual contact points. An empty patch
    falls back to the nearest valid (widened) patch inside the helpers.
    """
    family = cand.closing_line.family
    if family in _AXIS_FAMILY:
        return sqm.avg_endpoint_curvature(sq, _AXIS_FAMILY[family], patch_angle)
    vals = []
    for c in cand.closing_line.contacts():
        p = sqm.param_of_point(sq, c)
        try:
            vals.append(sqm.patch_mean_curvature(sq, p.eta, p.omega, patch_angle))
        except EmptyPatch:
            continue
    if not vals:
        raise EmptyPatch("no valid curvature patch at either contact")
    return float(np.mean(vals))


def score_candidate(cand: GraspCandidate, result: RecoveryResult,
                    cloud: PointCloud, sp: ScoreParams) -> ScoreBreakdown:
    """Score one candidate against its source superquadric and the cloud."""
    S = sqm.sample_surface(result.sq, sp.sample_count)
    Y = cloud.points[result.inliers]
    alpha = point_to_surface(Y, S)
    beta = coverage_ratio(Y, S, sp.d_th)
    gamma = contact_curvature(cand, result.sq, sp.patch_angle) * sp.curvature_scale
    delta = float(np.linalg.norm(cand.closing_point - cloud.centroid()))
    return component_scores(alpha, beta, gamma, delta, sp)


def score_all(cands, results, cloud: PointCloud, sp: ScoreParams):
    """Score a candidate list, sharing per-result and per-line computations.

    Produces the same numbers as score_candidate on each element.
    """
    per_result: dict = {}
    per_line: dict = {}
    centroid = cloud.centroid()
    out = []
    from dataclasses import replace as _replace

    for cand in cands:
        src = cand.source_sq_index
        if src not in per_result:
            result = results[src]
            S = sqm.sample_surface(result.sq, sp.sample_count)
            Y = cloud.points[result.inliers]
            per_result[src] = (point_to_surface(Y, S), coverage_ratio(Y, S, sp.d_th))
        alpha, beta = per_result[src]
        line_key = (src, cand.line_ordinal)
        if line_key not in per_line:
            per_line[line_key] = contact_curvature(cand, results[src].sq,
                                                   sp.patch_angle)
        gamma = per_line[line_key] * sp.curvature_scale
        delta = float(np.linalg.norm(cand.closing_point - centroid))
        out.append(_replace(cand, score=component_scores(alpha, beta, gamma,
                                                         delta, sp)))
    return out


def rank_candidates(cands):
    """Sort scored candidates by descending h; ties fall back to higher
    coverage, then smaller center-of-mass distance, then input order."""
    for c in cands:
        if c.score is None:
            raise ValueError("all candidates must be scored before ranking")
    keyed = [(-c.score.h, -c.score.beta, c.score.delta, i, c)
             for i, c in enumerate(cands)]
    keyed.sort(key=lambda t: t[:4])
    return [c for *_, c in keyed]
