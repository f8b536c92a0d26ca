"""Breaking-curve detection: corner penalty, thresholding, refinement.

The corner penalty of a point is (l2 - l0) / l2 where l0 <= l1 <= l2 are
the eigenvalues of the centered covariance of its graph neighbors. A flat
neighborhood has l0 ~ 0 and penalty ~ 1; an isotropic (corner-like)
neighborhood has all eigenvalues comparable and penalty ~ 0, so 3D edges
are the points whose penalty falls below a threshold. Centering matters:
raw second moments would make the penalty depend on absolute position.

The raw thresholded set is refined with an opening-style schedule: small
connected components are dropped, degree-1 endpoints are eroded for a few
passes (closed loops survive because every loop point keeps two member
neighbors), then a dilation pass thickens what remains so curves close up.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cloud import PointCloud
from .constants import (
    ANALYTIC_EIG_FALLBACK_MARGIN,
    DEGENERATE_EIGENVALUE,
    MIN_COVARIANCE_NEIGHBORS,
)
from .graph import NeighborhoodGraph, connected_components


def symmetric_eigvals3(mats: np.ndarray) -> np.ndarray:
    """Eigenvalues (ascending) of a batch of symmetric 3x3 matrices.

    Uses the closed-form trigonometric solution for the characteristic
    polynomial, which vectorizes over millions of matrices. Batch entries
    whose discriminant is nearly degenerate (repeated roots) are rerouted
    through LAPACK for accuracy.
    """
    m = np.asarray(mats, dtype=np.float64).reshape(-1, 3, 3)
    a00, a11, a22 = m[:, 0, 0], m[:, 1, 1], m[:, 2, 2]
    a01, a02, a12 = m[:, 0, 1], m[:, 0, 2], m[:, 1, 2]

    off = a01 * a01 + a02 * a02 + a12 * a12
    q = (a00 + a11 + a22) / 3.0
    d0, d1, d2 = a00 - q, a11 - q, a22 - q
    p2 = d0 * d0 + d1 * d1 + d2 * d2 + 2.0 * off
    p = np.sqrt(p2 / 6.0)

    diagonal_like = p2 <= 0.0
    safe_p = np.where(diagonal_like, 1.0, p)
    b00, b11, b22 = d0 / safe_p, d1 / safe_p, d2 / safe_p
    b01, b02, b12 = a01 / safe_p, a02 / safe_p, a12 / safe_p
    half_det = 0.5 * (
        b00 * (b11 * b22 - b12 * b12)
        - b01 * (b01 * b22 - b12 * b02)
        + b02 * (b01 * b12 - b11 * b02)
    )
    r = np.clip(half_det, -1.0, 1.0)
    phi = np.arccos(r) / 3.0

    e2 = q + 2.0 * p * np.cos(phi)
    e0 = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    e1 = 3.0 * q - e0 - e2
    out = np.stack([e0, e1, e2], axis=1)
    out[diagonal_like] = np.sort(np.stack([a00, a11, a22], axis=1)[diagonal_like], axis=1)

    near_degenerate = (~diagonal_like) & (np.abs(half_det) >= 1.0 - ANALYTIC_EIG_FALLBACK_MARGIN)
    if near_degenerate.any():
        out[near_degenerate] = np.linalg.eigvalsh(m[near_degenerate])
    return np.sort(out, axis=1)


@dataclass(frozen=True)
class CornerPenaltyField:
    """Per-point penalty in [0, 1] plus the covariance eigenvalues behind it.

    low_degree_count tallies points with too few graph neighbors for a
    covariance; they are treated as flat (penalty 1).
    """

    values: np.ndarray
    eigenvalues: np.ndarray
    low_degree_count: int


def _row_sums(per_edge: np.ndarray, indptr: np.ndarray) -> np.ndarray:
    """Sum per-adjacency-entry values into per-point totals.

    np.add.reduceat misbehaves on empty segments, so those rows are fixed
    up to zero afterwards.
    """
    n = indptr.shape[0] - 1
    if per_edge.shape[0] == 0:
        shape = (n,) + per_edge.shape[1:]
        return np.zeros(shape, dtype=per_edge.dtype)
    # A zero sentinel row keeps every indptr value a valid reduceat index.
    pad = np.zeros((1,) + per_edge.shape[1:], dtype=per_edge.dtype)
    padded = np.concatenate([per_edge, pad], axis=0)
    sums = np.add.reduceat(padded, indptr[:-1], axis=0)
    empty = indptr[:-1] == indptr[1:]
    if empty.any():
        sums[empty] = 0
    return sums


def corner_penalty(c: PointCloud, g: NeighborhoodGraph) -> CornerPenaltyField:
    """Corner penalty of every point from its graph-neighbor covariance."""
    n = len(c)
    if g.num_points != n:
        raise ValueError("graph and cloud sizes differ")
    deg = g.degrees
    values = np.ones(n)
    eigenvalues = np.zeros((n, 3))
    usable = deg >= MIN_COVARIANCE_NEIGHBORS
    low_degree_count = int(n - usable.sum())
    if not usable.any():
        return CornerPenaltyField(values, eigenvalues, low_degree_count)

    pts = c.points
    neighbor_pts = pts[g.indices]
    mean = _row_sums(neighbor_pts, g.indptr)
    mean[usable] /= deg[usable, None]
    centered = neighbor_pts - mean[g.edge_rows()]
    outer = centered[:, :, None] * centered[:, None, :]
    cov = _row_sums(outer.reshape(-1, 9), g.indptr).reshape(n, 3, 3)
    cov[usable] /= deg[usable, None, None]

    lam = np.clip(symmetric_eigvals3(cov[usable]), 0.0, None)
    eigenvalues[usable] = lam
    l0, l2 = lam[:, 0], lam[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(l2 > DEGENERATE_EIGENVALUE, (l2 - l0) / l2, 1.0)
    values[usable] = np.clip(ratio, 0.0, 1.0)
    return CornerPenaltyField(values, eigenvalues, low_degree_count)


def threshold_curve_points(f: CornerPenaltyField, tau: float) -> np.ndarray:
    """Boolean membership mask: penalty strictly below tau."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    return f.values < tau


@dataclass(frozen=True)
class BreakingCurveSet:
    """Final curve membership and its connected components."""

    member: np.ndarray
    curves: list[np.ndarray]

    @property
    def count(self) -> int:
        return int(self.member.sum())


def refine_curves(
    raw: np.ndarray,
    g: NeighborhoodGraph,
    min_component: int = 10,
    prune_depth: int = 3,
    dilate_steps: int = 1,
) -> BreakingCurveSet:
    """Opening-style cleanup of a raw curve mask.

    Steps: drop raw components smaller than min_component; prune_depth
    passes of endpoint erosion (members with at most one member neighbor
    go, so isolated branches shrink while loops persist); dilate_steps
    passes adding every non-member neighbor of a member; recompute
    components. An empty result is valid.
    """
    member = np.asarray(raw, dtype=bool).copy()
    if member.shape[0] != g.num_points:
        raise ValueError("mask length does not match graph size")
    if min_component < 1:
        raise ValueError("min_component must be positive")
    if prune_depth < 0 or dilate_steps < 0:
        raise ValueError("prune_depth and dilate_steps must be non-negative")

    if member.any():
        for comp in connected_components(g, active=member):
            if comp.shape[0] < min_component:
                member[comp] = False

    rows = g.edge_rows()
    for _ in range(prune_depth):
        if not member.any():
            break
        member_neighbor_count = _row_sums(
            member[g.indices].astype(np.int64), g.indptr
        )
        survivors = member & (member_neighbor_count >= 2)
        if np.array_equal(survivors, member):
            break
        member = survivors

    for _ in range(dilate_steps):
        if not member.any():
            break
        grown = member.copy()
        grown[g.indices[member[rows]]] = True
        member = grown

    curves = connected_components(g, active=member) if member.any() else []
    return BreakingCurveSet(member=member, curves=curves)
