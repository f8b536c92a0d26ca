"""Point cloud and axis-aligned bounding box types.

A point cloud is an ordered sequence of finite 3D points stored as an
(n, 3) float64 array. Point order is a pipeline-wide contract: index i
refers to the same point in every stage of a run. Instances are immutable
after construction (the backing array is marked read-only), so they can be
shared freely between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _as_readonly_points(points) -> np.ndarray:
    arr = np.ascontiguousarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"points must have shape (n, 3), got {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError("empty cloud: a point cloud needs at least one point")
    if not np.isfinite(arr).all():
        raise ValueError("point coordinates must be finite (no NaN/Inf)")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class PointCloud:
    """Ordered set of 3D points with a textual source identifier."""

    points: np.ndarray
    source_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "points", _as_readonly_points(self.points))

    def __len__(self) -> int:
        return self.points.shape[0]

    def select(self, indices, source_id: str | None = None) -> "PointCloud":
        """Sub-cloud at the given point indices, preserving their order."""
        sid = self.source_id if source_id is None else source_id
        return PointCloud(self.points[np.asarray(indices)], sid)

    def aabb(self) -> "Aabb":
        return Aabb.from_points(self.points)


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned bounding box, min_corner <= max_corner componentwise."""

    min_corner: np.ndarray
    max_corner: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.min_corner, dtype=np.float64).reshape(3).copy()
        hi = np.asarray(self.max_corner, dtype=np.float64).reshape(3).copy()
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise ValueError("bounding box corners must be finite")
        if np.any(lo > hi):
            raise ValueError("min_corner must not exceed max_corner")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "min_corner", lo)
        object.__setattr__(self, "max_corner", hi)

    @classmethod
    def from_points(cls, points: np.ndarray) -> "Aabb":
        pts = np.asarray(points, dtype=np.float64)
        return cls(pts.min(axis=0), pts.max(axis=0))

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.max_corner - self.min_corner))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.min_corner + self.max_corner)
