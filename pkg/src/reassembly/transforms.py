"""Rigid transforms (proper rotation + translation) and their algebra.

Rotations are stored as 3x3 matrices; that is the representation ICP's
closed-form step produces, and keeping a single canonical form avoids
sync bugs. Quaternion conversion exists only for sampling random rotations
in synthetic-data generation. Matrices act on column vectors: a point p
maps to R @ p + t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cloud import PointCloud
from .constants import ROTATION_ORTHONORMALITY_TOL


def _orthonormality_defect(rotation: np.ndarray) -> float:
    return float(np.abs(rotation.T @ rotation - np.eye(3)).max())


def _project_to_rotation(matrix: np.ndarray) -> np.ndarray:
    """Nearest proper rotation in Frobenius norm, via SVD."""
    u, _, vt = np.linalg.svd(matrix)
    if np.linalg.det(u @ vt) < 0.0:
        u = u.copy()
        u[:, -1] = -u[:, -1]
    return u @ vt


@dataclass(frozen=True)
class RigidTransform:
    """Proper rigid motion of 3D space: p -> rotation @ p + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3).copy()
        tra = np.asarray(self.translation, dtype=np.float64).reshape(3).copy()
        if not (np.isfinite(rot).all() and np.isfinite(tra).all()):
            raise ValueError("transform entries must be finite")
        defect = _orthonormality_defect(rot)
        det = np.linalg.det(rot)
        if defect > ROTATION_ORTHONORMALITY_TOL or abs(det - 1.0) > ROTATION_ORTHONORMALITY_TOL:
            raise ValueError(
                f"rotation is not orthonormal with det +1 "
                f"(defect {defect:.3e}, det {det:.17g})"
            )
        rot.flags.writeable = False
        tra.flags.writeable = False
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tra)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_axis_angle(cls, axis, angle_deg: float, translation=(0.0, 0.0, 0.0)) -> "RigidTransform":
        """Rotation by angle_deg about the given axis (Rodrigues formula)."""
        ax = np.asarray(axis, dtype=np.float64).reshape(3)
        norm = np.linalg.norm(ax)
        if norm == 0.0:
            raise ValueError("rotation axis must be nonzero")
        ax = ax / norm
        theta = math.radians(angle_deg)
        k = np.array([
            [0.0, -ax[2], ax[1]],
            [ax[2], 0.0, -ax[0]],
            [-ax[1], ax[0], 0.0],
        ])
        rot = np.eye(3) + math.sin(theta) * k + (1.0 - math.cos(theta)) * (k @ k)
        return cls(_project_to_rotation(rot), translation)

    @classmethod
    def from_quaternion(cls, quat, translation=(0.0, 0.0, 0.0)) -> "RigidTransform":
        """Rotation from a (w, x, y, z) quaternion; need not be unit length."""
        q = np.asarray(quat, dtype=np.float64).reshape(4)
        n = np.linalg.norm(q)
        if n == 0.0:
            raise ValueError("quaternion must be nonzero")
        w, x, y, z = q / n
        rot = np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ])
        return cls(_project_to_rotation(rot), translation)


def random_rotation(rng: np.random.Generator) -> RigidTransform:
    """Uniformly random rotation, sampled via a normalized Gaussian quaternion."""
    q = rng.normal(size=4)
    return RigidTransform.from_quaternion(q)


def apply_to_points(t: RigidTransform, points: np.ndarray) -> np.ndarray:
    """Apply a rigid transform to an (n, 3) array of points."""
    return points @ t.rotation.T + t.translation


def apply_transform(t: RigidTransform, c: PointCloud) -> PointCloud:
    """Transformed copy of a cloud; point order and source id are preserved."""
    return PointCloud(apply_to_points(t, c.points), c.source_id)


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Composition applying b first, then a.

    Long chains can drift off the rotation manifold; when the product
    exceeds the orthonormality tolerance it is re-projected via SVD.
    """
    rot = a.rotation @ b.rotation
    if _orthonormality_defect(rot) > ROTATION_ORTHONORMALITY_TOL:
        rot = _project_to_rotation(rot)
    return RigidTransform(rot, a.rotation @ b.translation + a.translation)


def inverse(t: RigidTransform) -> RigidTransform:
    return RigidTransform(t.rotation.T, -(t.rotation.T @ t.translation))


def geodesic_rotation_angle(a: RigidTransform, b: RigidTransform) -> float:
    """Angle in degrees, in [0, 180], between the two rotations.

    Computed as arccos((trace(Ra^T Rb) - 1) / 2) with the argument clamped
    to the valid arccos domain.
    """
    cos_theta = (np.trace(a.rotation.T @ b.rotation) - 1.0) / 2.0
    return math.degrees(math.acos(min(1.0, max(-1.0, cos_theta))))
