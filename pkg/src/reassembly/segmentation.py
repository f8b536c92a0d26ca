"""Region segmentation bounded by breaking curves.

Regions start as the connected components of the graph restricted to
non-curve points (flood fill cannot cross a curve). Curve points are then
absorbed by k-NN voting: each takes the modal region id among its nearest
already-assigned points, queried spatially rather than through graph
adjacency because dilation may have disconnected a curve point from its
natural region. Ties go to the smaller region id. Voting rounds repeat
against a frozen snapshot until everything is assigned; points that can
never collect a vote fall back to the region of the globally nearest
assigned point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .cloud import PointCloud
from .curves import BreakingCurveSet
from .graph import NeighborhoodGraph, connected_components, query_workers

UNASSIGNED = -1


@dataclass(frozen=True)
class RegionSegmentation:
    """Per-point region ids plus the index set and size of each region.

    region_of holds UNASSIGNED for curve points until voting has run.
    """

    region_of: np.ndarray
    regions: list[np.ndarray]
    region_sizes: np.ndarray

    @property
    def num_regions(self) -> int:
        return len(self.regions)

    def is_total(self) -> bool:
        return bool((self.region_of != UNASSIGNED).all())


def _from_region_of(region_of: np.ndarray) -> RegionSegmentation:
    ids = np.unique(region_of[region_of != UNASSIGNED])
    regions = [np.flatnonzero(region_of == rid) for rid in ids]
    sizes = np.array([r.shape[0] for r in regions], dtype=np.int64)
    return RegionSegmentation(region_of=region_of, regions=regions, region_sizes=sizes)


def grow_regions(g: NeighborhoodGraph, b: BreakingCurveSet) -> RegionSegmentation:
    """Flood-fill regions over non-curve points; curve points stay unassigned.

    Region ids follow the order of each component's smallest point index,
    which makes the downstream exhaustive search reproducible.
    """
    member = np.asarray(b.member, dtype=bool)
    if member.shape[0] != g.num_points:
        raise ValueError("curve mask length does not match graph size")
    region_of = np.full(g.num_points, UNASSIGNED, dtype=np.int64)
    for rid, comp in enumerate(connected_components(g, active=~member)):
        region_of[comp] = rid
    return _from_region_of(region_of)


def assign_curve_points(
    s: RegionSegmentation,
    c: PointCloud,
    b: BreakingCurveSet,
    k_vote: int = 5,
) -> RegionSegmentation:
    """Absorb unassigned (curve) points into regions by k-NN voting."""
    if k_vote < 1:
        raise ValueError(f"k_vote must be positive, got {k_vote}")
    if s.region_of.shape[0] != len(c):
        raise ValueError("segmentation and cloud sizes differ")
    if s.num_regions == 0:
        raise ValueError("nothing to vote into: no regions exist")

    region_of = s.region_of.copy()
    workers = query_workers()
    while True:
        pending = np.flatnonzero(region_of == UNASSIGNED)
        if pending.size == 0:
            break
        assigned = np.flatnonzero(region_of != UNASSIGNED)
        tree = cKDTree(c.points[assigned])
        k = min(k_vote, assigned.shape[0])
        _, nn = tree.query(c.points[pending], k=k, workers=workers)
        votes = region_of[assigned[np.atleast_2d(nn.reshape(pending.size, k))]]

        counts = np.zeros((pending.size, s.num_regions), dtype=np.int64)
        np.add.at(counts, (np.arange(pending.size)[:, None], votes), 1)
        winners = counts.argmax(axis=1)  # argmax takes the smaller id on ties
        voted = counts.max(axis=1) > 0
        if not voted.any():
            # No vote anywhere this round: attach to the nearest assigned point.
            _, nearest = tree.query(c.points[pending], k=1, workers=workers)
            region_of[pending] = region_of[assigned[np.atleast_1d(nearest)]]
            break
        region_of[pending[voted]] = winners[voted]
    return _from_region_of(region_of)


def filter_small_regions(s: RegionSegmentation, min_fraction: float) -> list[int]:
    """Region ids whose size is at least min_fraction of the cloud.

    Ordered by descending size, ties by ascending id. Raises when nothing
    survives, which is the documented failure mode of an over-aggressive
    threshold.
    """
    if not 0.0 < min_fraction < 1.0:
        raise ValueError(f"min_fraction must lie in (0, 1), got {min_fraction}")
    total = s.region_of.shape[0]
    threshold = min_fraction * total
    retained = [rid for rid, size in enumerate(s.region_sizes) if size >= threshold]
    if not retained:
        raise ValueError(
            f"no candidate regions: none of {s.num_regions} regions reaches "
            f"{min_fraction:.3g} of {total} points"
        )
    retained.sort(key=lambda rid: (-int(s.region_sizes[rid]), rid))
    return retained
