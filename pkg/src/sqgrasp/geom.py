"""Rotation / rigid-transform helpers and low-level sampling utilities.

Conventions: rotation matrices are 3x3 with columns = frame axes, poses are
4x4 homogeneous transforms mapping local coordinates into world coordinates,
quaternions are scalar-first [w, x, y, z].
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.transform import Rotation

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))

# Coordinate sign flips realizing {I, Rx(pi), Ry(pi), Rz(pi)} in a body frame.
FLIP_MATS = (
    np.diag([1.0, 1.0, 1.0]),
    np.diag([1.0, -1.0, -1.0]),
    np.diag([-1.0, 1.0, -1.0]),
    np.diag([-1.0, -1.0, 1.0]),
)


def rot_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def make_pose(R: np.ndarray, t) -> np.ndarray:
    T = np.eye(4)
    T[:3, :3] = R
    T[:3, 3] = np.asarray(t, dtype=float)
    return T


def pose_inverse(T: np.ndarray) -> np.ndarray:
    R = T[:3, :3]
    return make_pose(R.T, -R.T @ T[:3, 3])


def apply_pose(T: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Apply a 4x4 pose to one point (3,) or a stack of points (N, 3)."""
    pts = np.asarray(pts, dtype=float)
    return pts @ T[:3, :3].T + T[:3, 3]


def is_rotation(R: np.ndarray, tol: float = 1e-9) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    if not np.allclose(R.T @ R, np.eye(3), atol=tol):
        return False
    return abs(np.linalg.det(R) - 1.0) <= tol


def quat_wxyz_from_matrix(R: np.ndarray) -> np.ndarray:
    q = Rotation.from_matrix(R).as_quat()  # scipy is [x, y, z, w]
    q = np.array([q[3], q[0], q[1], q[2]])
    if q[0] < 0:  # canonical sign for deterministic serialization
        q = -q
    return q


def matrix_from_quat_wxyz(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return Rotation.from_quat([q[1], q[2], q[3], q[0]]).as_matrix()


def matrix_from_rotvec(rv) -> np.ndarray:
    return Rotation.from_rotvec(np.asarray(rv, dtype=float)).as_matrix()


def rotvec_from_matrix(R: np.ndarray) -> np.ndarray:
    return Rotation.from_matrix(R).as_rotvec()


def rotation_geodesic(Ra: np.ndarray, Rb: np.ndarray) -> float:
    """Angle in radians of the relative rotation between Ra and Rb."""
    c = (np.trace(Ra.T @ Rb) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def flip_symmetric_angle(Ra: np.ndarray, Rb: np.ndarray) -> float:
    """Geodesic distance between frames, quotiented by the pi-flip group."""
    return min(rotation_geodesic(Ra @ F, Rb) for F in FLIP_MATS)


def fibonacci_sphere(n: int) -> np.ndarray:
    """n roughly equidistributed unit directions (golden-angle spiral)."""
    i = np.arange(n, dtype=float)
    z = 1.0 - (2.0 * i + 1.0) / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = i * GOLDEN_ANGLE
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def orthonormal_to(d: np.ndarray) -> np.ndarray:
    """A deterministic unit vector perpendicular to unit direction d.

    Prefers the projection of +z, falls back to +x near the poles of d.
    """
    d = np.asarray(d, dtype=float)
    base = np.array([0.0, 0.0, 1.0]) if abs(d[2]) <= 0.9 else np.array([1.0, 0.0, 0.0])
    v = base - np.dot(base, d) * d
    return v / np.linalg.norm(v)
