"""Synthetic fractures with known ground-truth poses.

generate_fracture splits a source cloud in two by the signed distance to a
cut surface (a plane, optionally perturbed by smooth low-frequency relief
so the break interlocks), scrambles each side with an independent bounded
random pose, and records the relative transform that reassembles them.
Everything is driven by one integer seed: the same seed reproduces the
fracture bit for bit.

sample_fractured_primitive builds desk-scale stand-ins for scanned broken
objects: the surface cloud of a fractured solid (cube, sphere or cylinder),
that is, the outer shell plus both copies of the fracture wall, offset a
hair apart along the cut normal the way two mating fracture faces sit in
an assembled scan. Splitting such a cloud with the same cut gives two
closed fragment surfaces whose walls coincide when correctly assembled,
which is what region matching needs to latch onto.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cloud import Aabb, PointCloud
from .metrics import rotation_rmse, translation_rmse
from .transforms import (
    RigidTransform,
    apply_transform,
    compose,
    inverse,
)

_RELIEF_WAVES = 3

# Relief wavelengths default to roughly one gentle undulation across the
# object (frequencies are per relief_scale). Steeper ranges give stronger
# rotational locking at the cost of sharper wall curvature.
DEFAULT_RELIEF_FREQS = (0.6, 1.4)


@dataclass(frozen=True)
class PlaneCut:
    """Oriented cut plane: signed distance is positive on the normal side."""

    origin: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=np.float64).reshape(3).copy()
        n = np.asarray(self.normal, dtype=np.float64).reshape(3).copy()
        norm = np.linalg.norm(n)
        if norm == 0.0:
            raise ValueError("cut normal must be nonzero")
        n /= norm
        o.flags.writeable = False
        n.flags.writeable = False
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "normal", n)

    def basis(self) -> tuple[np.ndarray, np.ndarray]:
        """Deterministic orthonormal in-plane axes (e1, e2)."""
        n = self.normal
        helper = np.zeros(3)
        helper[int(np.argmin(np.abs(n)))] = 1.0
        e1 = np.cross(n, helper)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(n, e1)
        return e1, e2


def _relief_params(seed: int, freq_range: tuple[float, float]):
    """Seeded low-frequency wave set for the cut relief (unit amplitude)."""
    rng = np.random.default_rng(np.random.SeedSequence([0x5E11EF, seed & 0xFFFFFFFF]))
    angles = rng.uniform(0.0, 2.0 * np.pi, size=_RELIEF_WAVES)
    freqs = rng.uniform(freq_range[0], freq_range[1], size=_RELIEF_WAVES)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=_RELIEF_WAVES)
    amps = rng.uniform(0.5, 1.0, size=_RELIEF_WAVES)
    amps /= amps.sum()
    return angles, freqs, phases, amps


def _relief_values(
    u: np.ndarray,
    v: np.ndarray,
    seed: int,
    scale: float,
    freq_range: tuple[float, float] = DEFAULT_RELIEF_FREQS,
) -> np.ndarray:
    """Smooth relief height in [-1, 1] over in-plane coordinates."""
    angles, freqs, phases, amps = _relief_params(seed, freq_range)
    out = np.zeros_like(u)
    for ang, freq, phase, amp in zip(angles, freqs, phases, amps):
        along = (u * math.cos(ang) + v * math.sin(ang)) / scale
        out += amp * np.sin(2.0 * np.pi * freq * along + phase)
    return out


def cut_signed_distance(
    points: np.ndarray,
    cut: PlaneCut,
    jitter_amp: float = 0.0,
    seed: int = 0,
    relief_scale: float = 1.0,
    relief_freqs: tuple[float, float] = DEFAULT_RELIEF_FREQS,
) -> np.ndarray:
    """Signed distance of points to the (optionally jittered) cut surface.

    relief_scale sets the relief wavelength reference (typically the
    bounding-box diagonal of the object being cut); it and relief_freqs
    must match between any two callers that need the same surface.
    """
    pts = np.asarray(points, dtype=np.float64)
    base = (pts - cut.origin) @ cut.normal
    if jitter_amp == 0.0:
        return base
    e1, e2 = cut.basis()
    u = (pts - cut.origin) @ e1
    v = (pts - cut.origin) @ e2
    return base - jitter_amp * _relief_values(u, v, seed, relief_scale, relief_freqs)


def _bounded_random_pose(rng: np.random.Generator, max_angle_deg: float, max_shift: float) -> RigidTransform:
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(0.0, max_angle_deg)
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    shift = rng.uniform(0.0, max_shift) * direction
    return RigidTransform.from_axis_angle(axis, angle, shift)


@dataclass(frozen=True)
class SyntheticFracture:
    """Two scrambled fragments plus everything needed to check a solution."""

    fragment_a: PointCloud
    fragment_b: PointCloud
    gt_relative: RigidTransform  # maps fragment_b into fragment_a's frame
    seed: int
    cut: PlaneCut
    jitter_amp: float
    indices_a: np.ndarray
    indices_b: np.ndarray
    pose_a: RigidTransform
    pose_b: RigidTransform
    source_diagonal: float


def generate_fracture(
    source: PointCloud,
    cut: PlaneCut,
    jitter_amp: float = 0.0,
    pose_seed: int = 0,
    max_angle_deg: float = 60.0,
    max_shift: float = 0.3,
    relief_scale: float | None = None,
    relief_freqs: tuple[float, float] = DEFAULT_RELIEF_FREQS,
) -> SyntheticFracture:
    """Split a source cloud at a cut surface and scramble the two sides.

    max_shift is a fraction of the source bounding-box diagonal. The
    recorded gt_relative equals pose_a composed with inverse(pose_b), so
    applying it to fragment_b and uniting with fragment_a reassembles the
    source.
    """
    if len(source) < 1000:
        raise ValueError(f"source too small: need >= 1000 points, have {len(source)}")
    if jitter_amp < 0.0:
        raise ValueError("jitter_amp must be non-negative")
    bbox = source.aabb()
    diag = bbox.diagonal
    if relief_scale is None:
        relief_scale = diag

    signed = cut_signed_distance(source.points, cut, jitter_amp, pose_seed, relief_scale, relief_freqs)
    side_a = signed >= 0.0
    indices_a = np.flatnonzero(side_a)
    indices_b = np.flatnonzero(~side_a)
    if indices_a.size == 0 or indices_b.size == 0:
        raise ValueError("degenerate cut: one side of the split is empty")

    rng = np.random.default_rng(np.random.SeedSequence([0xFAC7, pose_seed & 0xFFFFFFFF]))
    pose_a = _bounded_random_pose(rng, max_angle_deg, max_shift * diag)
    pose_b = _bounded_random_pose(rng, max_angle_deg, max_shift * diag)

    fragment_a = apply_transform(pose_a, source.select(indices_a, source.source_id + "_a"))
    fragment_b = apply_transform(pose_b, source.select(indices_b, source.source_id + "_b"))
    return SyntheticFracture(
        fragment_a=fragment_a,
        fragment_b=fragment_b,
        gt_relative=compose(pose_a, inverse(pose_b)),
        seed=pose_seed,
        cut=cut,
        jitter_amp=float(jitter_amp),
        indices_a=indices_a,
        indices_b=indices_b,
        pose_a=pose_a,
        pose_b=pose_b,
        source_diagonal=diag,
    )


def evaluate_pair(pred: RigidTransform, fracture: SyntheticFracture) -> tuple[float, float]:
    """Rotation error (degrees) and normalized translation error of a solution."""
    rot = rotation_rmse(pred, fracture.gt_relative)
    tra = translation_rmse(pred, fracture.gt_relative, normalizer=fracture.source_diagonal)
    return rot, tra


# -- primitive samplers ------------------------------------------------------

PRIMITIVE_SHAPES = ("cube", "sphere", "cylinder")


def _cube_surface(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples on the surface of the unit cube centered at the origin."""
    face = rng.integers(0, 6, size=n)
    uv = rng.uniform(-0.5, 0.5, size=(n, 2))
    pts = np.empty((n, 3))
    axis = face // 2
    sign = np.where(face % 2 == 0, -0.5, 0.5)
    for a in range(3):
        m = axis == a
        others = [b for b in range(3) if b != a]
        pts[m, a] = sign[m]
        pts[np.ix_(m, others)] = uv[m]
    return pts


def _sphere_surface(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples on the unit-diameter sphere centered at the origin."""
    vec = rng.normal(size=(n, 3))
    vec /= np.linalg.norm(vec, axis=1, keepdims=True)
    return 0.5 * vec


def _cylinder_surface(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples on a unit-diameter, unit-height cylinder surface."""
    side_area = math.pi  # 2 pi r h with r = 0.5, h = 1
    cap_area = math.pi * 0.25
    total = side_area + 2 * cap_area
    which = rng.uniform(0.0, total, size=n)
    pts = np.empty((n, 3))

    on_side = which < side_area
    m = int(on_side.sum())
    theta = rng.uniform(0.0, 2.0 * math.pi, size=m)
    pts[on_side, 0] = 0.5 * np.cos(theta)
    pts[on_side, 1] = 0.5 * np.sin(theta)
    pts[on_side, 2] = rng.uniform(-0.5, 0.5, size=m)

    on_cap = ~on_side
    m = int(on_cap.sum())
    radius = 0.5 * np.sqrt(rng.uniform(0.0, 1.0, size=m))
    theta = rng.uniform(0.0, 2.0 * math.pi, size=m)
    top = which[on_cap] >= side_area + cap_area
    pts[on_cap, 0] = radius * np.cos(theta)
    pts[on_cap, 1] = radius * np.sin(theta)
    pts[on_cap, 2] = np.where(top, 0.5, -0.5)
    return pts


_SURFACE_SAMPLERS = {
    "cube": _cube_surface,
    "sphere": _sphere_surface,
    "cylinder": _cylinder_surface,
}

_SHELL_AREA = {"cube": 6.0, "sphere": math.pi, "cylinder": 1.5 * math.pi}


def _inside_primitive(shape: str, pts: np.ndarray) -> np.ndarray:
    if shape == "cube":
        return (np.abs(pts) <= 0.5).all(axis=1)
    if shape == "sphere":
        return np.einsum("ij,ij->i", pts, pts) <= 0.25
    rho2 = pts[:, 0] ** 2 + pts[:, 1] ** 2
    return (rho2 <= 0.25) & (np.abs(pts[:, 2]) <= 0.5)


def sample_primitive_surface(shape: str, n_points: int, seed: int = 0) -> PointCloud:
    """Surface cloud of a unit cube, sphere or cylinder centered at the origin."""
    if shape not in _SURFACE_SAMPLERS:
        raise ValueError(f"unknown shape {shape!r}, expected one of {PRIMITIVE_SHAPES}")
    rng = np.random.default_rng(np.random.SeedSequence([0x5A3B1E, seed & 0xFFFFFFFF]))
    return PointCloud(_SURFACE_SAMPLERS[shape](n_points, rng), source_id=shape)


def sample_fractured_primitive(
    shape: str,
    n_points: int,
    cut: PlaneCut,
    jitter_amp: float = 0.0,
    seed: int = 0,
    relief_scale: float | None = None,
    relief_freqs: tuple[float, float] = DEFAULT_RELIEF_FREQS,
    wall_gap: float | None = None,
    wall_density_factor: float = 1.6,
) -> PointCloud:
    """Assembled surface cloud of a fractured primitive.

    The cloud unions the outer shell with two independent samplings of the
    internal fracture wall, offset by +-wall_gap/2 along the cut normal so
    that splitting at the same cut sends one wall copy to each fragment.
    Relief (jitter_amp > 0, driven by `seed` and `relief_scale`) carves
    matching interlocking geometry into both copies. Pass the same cut,
    jitter_amp, seed and relief_scale to generate_fracture to scramble the
    result consistently.

    The wall is sampled wall_density_factor times denser than the shell,
    the way close-range scans resolve fracture detail; it also pins the
    mating-face match below any intact-surface coincidence, since Chamfer
    noise floors scale inversely with density.
    """
    if shape not in _SURFACE_SAMPLERS:
        raise ValueError(f"unknown shape {shape!r}, expected one of {PRIMITIVE_SHAPES}")
    if relief_scale is None:
        relief_scale = math.sqrt(3.0)
    rng = np.random.default_rng(np.random.SeedSequence([0xF0A55, seed & 0xFFFFFFFF]))

    # Estimate the wall area by Monte Carlo over the cut-plane footprint.
    e1, e2 = cut.basis()
    half_extent = math.sqrt(3.0) / 2.0  # covers any unit primitive cross-section
    probe_u = rng.uniform(-half_extent, half_extent, size=4096)
    probe_v = rng.uniform(-half_extent, half_extent, size=4096)
    probe = (
        cut.origin
        + probe_u[:, None] * e1
        + probe_v[:, None] * e2
        + (jitter_amp * _relief_values(probe_u, probe_v, seed, relief_scale, relief_freqs))[:, None] * cut.normal
    )
    inside_frac = float(_inside_primitive(shape, probe).mean())
    wall_area = inside_frac * (2.0 * half_extent) ** 2
    if wall_area <= 0.0:
        raise ValueError("cut surface does not intersect the primitive")

    shell_area = _SHELL_AREA[shape]
    weighted_wall = wall_density_factor * wall_area
    total_weight = shell_area + 2.0 * weighted_wall
    n_wall = max(1, int(round(n_points * weighted_wall / total_weight)))
    n_shell = n_points - 2 * n_wall
    if n_shell < 1:
        raise ValueError("n_points too small for the requested geometry")

    shell = _SURFACE_SAMPLERS[shape](n_shell, rng)

    def wall_layer(count: int, offset: float) -> np.ndarray:
        out = np.empty((count, 3))
        have = 0
        while have < count:
            batch = max(256, 2 * (count - have))
            u = rng.uniform(-half_extent, half_extent, size=batch)
            v = rng.uniform(-half_extent, half_extent, size=batch)
            relief = jitter_amp * _relief_values(u, v, seed, relief_scale, relief_freqs)
            pts = cut.origin + u[:, None] * e1 + v[:, None] * e2 + relief[:, None] * cut.normal
            pts = pts[_inside_primitive(shape, pts)]
            take = min(count - have, pts.shape[0])
            out[have:have + take] = pts[:take]
            have += take
        return out + offset * cut.normal

    if wall_gap is None:
        wall_density = n_wall / wall_area
        wall_gap = 0.6 / math.sqrt(wall_density)  # a little over the wall spacing
    wall_a = wall_layer(n_wall, +0.5 * wall_gap)
    wall_b = wall_layer(n_wall, -0.5 * wall_gap)

    pts = np.vstack([shell, wall_a, wall_b])
    return PointCloud(pts, source_id=f"fractured_{shape}")


def fragment_bbox_union_diagonal(a: PointCloud, b: PointCloud, relative: RigidTransform) -> float:
    """Diagonal of the assembled bounding box (b moved into a's frame)."""
    moved = apply_transform(relative, b)
    pts = np.vstack([a.points, moved.points])
    return Aabb.from_points(pts).diagonal
