"""Shared fixtures and synthetic-case builders."""

import math

import numpy as np
import pytest

from reassembly.cloud import PointCloud
from reassembly.graph import NeighborhoodGraph
from reassembly.synthetic import PlaneCut, generate_fracture, sample_fractured_primitive

CUBE_DIAG = math.sqrt(3.0)


def graph_from_edges(n: int, edges, epsilon: float = 1.0, k: int = 1) -> NeighborhoodGraph:
    """Build a NeighborhoodGraph directly from an undirected edge list."""
    pairs = []
    for i, j in edges:
        pairs.append((i, j))
        pairs.append((j, i))
    pairs.sort()
    indptr = np.zeros(n + 1, dtype=np.int64)
    indices = np.asarray([j for _, j in pairs], dtype=np.int64)
    counts = np.bincount([i for i, _ in pairs], minlength=n)
    indptr[1:] = np.cumsum(counts)
    return NeighborhoodGraph(indptr=indptr, indices=indices, epsilon=epsilon, k=k)


def random_cloud(n: int, rng: np.random.Generator, scale: float = 1.0) -> PointCloud:
    return PointCloud(scale * rng.uniform(-1.0, 1.0, size=(n, 3)), source_id="random")


def random_surface_cloud(n: int, rng: np.random.Generator) -> PointCloud:
    """Smooth, asymmetric single-valued surface patch over the unit square."""
    uv = rng.uniform(0.0, 1.0, size=(n, 2))
    u, v = uv[:, 0], uv[:, 1]
    z = (
        0.25 * np.sin(2.3 * u + 0.7)
        + 0.2 * np.cos(3.1 * v + 1.3)
        + 0.15 * np.sin(2.9 * u * v + 0.4)
    )
    return PointCloud(np.column_stack([u, v, z]), source_id="surface")


# -- fracture case protocol ---------------------------------------------------
#
# Pose recovery on a planar (relief-free) break is only well posed when the
# fracture cross-section has no nontrivial symmetry: any plane section of a
# sphere is a disc, any plane section of a cylinder is mirror-symmetric about
# the plane spanned by the axis and the cut normal, and both symmetries map
# one mating face onto the other exactly, so the ground truth is
# unrecoverable for any method. Cubes admit asymmetric planar sections; the
# edge-wedge cuts below produce elongated scalene quadrilaterals while
# keeping every wall-to-face crease steep enough to detect. Relief (jittered
# cuts) breaks the symmetries, so those cases cover all three shapes.


def cube_edge_cut(seed: int) -> PlaneCut:
    rng = np.random.default_rng(np.random.SeedSequence([88, seed]))
    mags = np.array([0.72, 0.58, 0.33]) + rng.uniform(-0.025, 0.025, 3)
    axes = rng.permutation(3)
    normal = np.empty(3)
    normal[axes] = mags * rng.choice([-1.0, 1.0], 3)
    normal = normal / np.linalg.norm(normal)
    t = rng.uniform(0.42, 0.48)
    return PlaneCut(origin=t * normal, normal=normal)


def sphere_offset_cut(seed: int) -> PlaneCut:
    rng = np.random.default_rng(np.random.SeedSequence([44, seed]))
    n = rng.normal(size=3)
    n /= np.linalg.norm(n)
    return PlaneCut(origin=rng.uniform(0.08, 0.15) * n, normal=n)


def cylinder_tilt_cut(seed: int) -> PlaneCut:
    rng = np.random.default_rng(np.random.SeedSequence([55, seed]))
    tilt = math.radians(rng.uniform(14, 20))
    az = rng.uniform(0, 2 * math.pi)
    n = np.array([math.sin(tilt) * math.cos(az), math.sin(tilt) * math.sin(az), math.cos(tilt)])
    return PlaneCut(origin=np.array([0.0, 0.0, rng.uniform(0.08, 0.14)]), normal=n)


# Relief frequency per shape: steep surfaces tolerate (and need) sharper
# relief for rotational locking; the cube's shallower creases need gentler
# waves so the rim stays detectable.
RELIEF_FREQS = {"cube": (0.6, 1.4), "cylinder": (1.5, 3.0), "sphere": (2.0, 4.0)}

PLANAR_CASES = [("cube", cube_edge_cut, seed) for seed in range(10)]

JITTERED_CASES = (
    [("cube", cube_edge_cut, seed) for seed in (0, 1, 2, 3)]
    + [("cylinder", cylinder_tilt_cut, seed) for seed in (0, 1, 2)]
    + [("sphere", sphere_offset_cut, seed) for seed in (0, 1, 2)]
)


def build_fracture_case(shape: str, cut_fn, seed: int, n_points: int = 20000, jitter_frac: float = 0.0):
    """Assembled fractured-primitive cloud, split and scrambled; returns the fracture."""
    cut = cut_fn(seed)
    jitter_amp = jitter_frac * CUBE_DIAG
    freqs = RELIEF_FREQS[shape]
    source = sample_fractured_primitive(
        shape, n_points, cut,
        jitter_amp=jitter_amp, seed=seed, relief_scale=CUBE_DIAG, relief_freqs=freqs,
    )
    return generate_fracture(
        source, cut,
        jitter_amp=jitter_amp, pose_seed=seed,
        max_angle_deg=60.0, max_shift=0.3,
        relief_scale=CUBE_DIAG, relief_freqs=freqs,
    )


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240831)
