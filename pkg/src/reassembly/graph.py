"""Spatial indexing and the epsilon-ball connectivity graph.

The neighborhood radius epsilon is the cloud-wide average distance to the
k nearest neighbors:

    epsilon = (1 / n) * (1 / k) * sum_p sum_{q in kNN(p)} |p - q|

with the query point itself excluded from its own neighbor set (distance-0
self terms would bias the estimate downward). Connectivity is then the
epsilon-ball graph: an undirected edge joins every pair of distinct points
at positive distance <= epsilon. k is used only for the radius estimate,
which keeps density adaptivity a global property of the cloud.

Nearest-neighbor search is exact, and single-point queries additionally
guarantee brute-force tie order (ascending distance, then ascending point
index), so index-backed results can be checked against an O(n^2) oracle.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components as _sparse_components
from scipy.spatial import cKDTree

from .cloud import PointCloud
from .constants import WORKERS_ENV_VAR

DEFAULT_K = 15


def query_workers() -> int:
    """Worker count for batched KD-tree queries.

    Defaults to all cores (-1); the environment variable overrides it.
    Query results are identical for any worker count.
    """
    raw = os.environ.get(WORKERS_ENV_VAR, "")
    try:
        value = int(raw)
    except ValueError:
        return -1
    return value if value != 0 else -1


class SpatialIndex:
    """Exact nearest-neighbor index over a fixed point cloud."""

    def __init__(self, cloud: PointCloud):
        self.cloud = cloud
        self._tree = cKDTree(cloud.points)

    @property
    def tree(self) -> cKDTree:
        return self._tree

    def knn(self, query, k: int, exclude_index: int | None = None):
        """k nearest points to `query`, with deterministic tie-breaking.

        Returns (indices, distances) sorted by ascending distance, ties by
        ascending index. When the query is a cloud point, pass its index as
        exclude_index so the point does not match itself; coincident
        duplicates still count as neighbors at distance 0.
        """
        pts = self.cloud.points
        n = pts.shape[0]
        limit = n - 1 if exclude_index is not None else n
        if not 1 <= k <= limit:
            raise ValueError(f"k must be in [1, {limit}], got {k}")
        q = np.asarray(query, dtype=np.float64).reshape(3)

        probe = k if exclude_index is None else k + 1
        dist_probe, _ = self._tree.query(q, k=probe)
        radius = float(np.atleast_1d(dist_probe)[-1])
        # Inflate slightly so candidates are never lost to last-ulp
        # differences between tree and numpy distance computation.
        candidates = self._tree.query_ball_point(q, radius * (1.0 + 1e-9) + 1e-300)
        cand = np.asarray(candidates, dtype=np.int64)
        if exclude_index is not None:
            cand = cand[cand != exclude_index]
        dist = np.linalg.norm(pts[cand] - q, axis=1)
        order = np.lexsort((cand, dist))[:k]
        return cand[order], dist[order]


def estimate_epsilon(c: PointCloud, k: int = DEFAULT_K) -> float:
    """Cloud-wide mean distance to each point's k nearest neighbors."""
    n = len(c)
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    if n < k + 1:
        raise ValueError(f"cloud too small: need at least {k + 1} points, have {n}")
    tree = cKDTree(c.points)
    dist, _ = tree.query(c.points, k=k + 1, workers=query_workers())
    # Column 0 is a distance-0 self match (or an equivalent duplicate);
    # the remaining k columns are the neighbor distances.
    return float(dist[:, 1:].mean())


@dataclass(frozen=True)
class NeighborhoodGraph:
    """Undirected epsilon-ball adjacency in CSR form.

    Neighbor lists are sorted, symmetric and free of self loops. The quoted
    directed construction reduces to this: the edge criterion (distance at
    most epsilon) is symmetric, and every downstream use needs symmetric
    reachability.
    """

    indptr: np.ndarray
    indices: np.ndarray
    epsilon: float
    k: int

    @property
    def num_points(self) -> int:
        return self.indptr.shape[0] - 1

    @property
    def num_edges(self) -> int:
        return self.indices.shape[0] // 2

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def edge_rows(self) -> np.ndarray:
        """Source point index of each directed adjacency entry."""
        return np.repeat(np.arange(self.num_points), self.degrees)


def build_graph(c: PointCloud, k: int = DEFAULT_K, epsilon_scale: float = 1.0) -> NeighborhoodGraph:
    """Build the epsilon-ball graph with epsilon = epsilon_scale * estimate."""
    if epsilon_scale <= 0.0:
        raise ValueError(f"epsilon_scale must be positive, got {epsilon_scale}")
    eps = epsilon_scale * estimate_epsilon(c, k)
    if eps <= 0.0:
        raise ValueError("epsilon is zero: all points coincide")

    n = len(c)
    tree = cKDTree(c.points)
    pairs = tree.query_pairs(r=eps, output_type="ndarray")
    if pairs.size:
        # Coincident duplicates are not edges (the criterion is 0 < d <= eps).
        gap = c.points[pairs[:, 0]] - c.points[pairs[:, 1]]
        pairs = pairs[np.einsum("ij,ij->i", gap, gap) > 0.0]

    both = np.vstack([pairs, pairs[:, ::-1]]) if pairs.size else np.empty((0, 2), dtype=np.int64)
    order = np.lexsort((both[:, 1], both[:, 0]))
    both = both[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(both[:, 0], minlength=n), out=indptr[1:])
    return NeighborhoodGraph(
        indptr=indptr,
        indices=both[:, 1].astype(np.int64, copy=False),
        epsilon=float(eps),
        k=k,
    )


def connected_components(g: NeighborhoodGraph, active=None) -> list[np.ndarray]:
    """Partition the active points into maximal connected index sets.

    Components are ordered by their smallest contained index and each
    component's indices are sorted ascending.
    """
    n = g.num_points
    if active is None:
        active_idx = np.arange(n)
    else:
        mask = np.asarray(active, dtype=bool)
        if mask.shape[0] != n:
            raise ValueError(f"mask length {mask.shape[0]} does not match point count {n}")
        active_idx = np.flatnonzero(mask)
    if active_idx.size == 0:
        return []

    adj = csr_matrix(
        (np.ones(g.indices.shape[0], dtype=np.int8), g.indices, g.indptr),
        shape=(n, n),
    )
    sub = adj[active_idx][:, active_idx]
    _, labels = _sparse_components(sub, directed=False)
    order = np.argsort(labels, kind="stable")
    boundaries = np.flatnonzero(np.diff(labels[order])) + 1
    comps = [active_idx[pos] for pos in np.split(order, boundaries)]
    comps.sort(key=lambda idx: int(idx[0]))
    return comps


def write_edge_list(g: NeighborhoodGraph, path) -> None:
    """Diagnostic dump: one 'i j' line per undirected edge, i < j."""
    rows = g.edge_rows()
    mask = rows < g.indices
    with open(path, "w") as fh:
        for i, j in zip(rows[mask], g.indices[mask]):
            fh.write(f"{i} {j}\n")
