"""Exhaustive region-pair registration.

Every retained region of fragment P is registered against every retained
region of fragment Q with point-to-point ICP (closed-form SVD update, no
normals needed), scored by symmetric mean-of-squares Chamfer distance, and
the globally best-scoring pair's transform aligns the whole Q fragment
into P's frame.

ICP is a local method and the fragments arrive in arbitrary SE(3) poses,
so each pair is attempted from a small deterministic set of initial
guesses: centroid alignment composed with the four proper sign assignments
that map Q's principal axes onto P's.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .cloud import PointCloud
from .constants import DEGENERATE_AXIS_RATIO
from .graph import query_workers
from .segmentation import RegionSegmentation
from .transforms import RigidTransform, apply_to_points, apply_transform, compose


@dataclass(frozen=True)
class IcpParams:
    max_iterations: int = 100
    correspondence_cutoff: float = math.inf
    convergence_eps: float = 1e-7

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if not self.correspondence_cutoff > 0.0:
            raise ValueError("correspondence_cutoff must be positive")
        if not self.convergence_eps > 0.0:
            raise ValueError("convergence_eps must be positive")


@dataclass(frozen=True)
class IcpResult:
    transform: RigidTransform
    rms_residual: float
    iterations: int
    residual_history: tuple[float, ...]
    starved: bool = False


def _least_squares_motion(src: np.ndarray, dst: np.ndarray) -> RigidTransform:
    """Closed-form rigid motion minimizing sum |R a + t - b|^2 over pairs."""
    ca = src.mean(axis=0)
    cb = dst.mean(axis=0)
    h = (src - ca).T @ (dst - cb)
    u, _, vt = np.linalg.svd(h)
    v = vt.T
    if np.linalg.det(v @ u.T) < 0.0:
        v = v.copy()
        v[:, -1] = -v[:, -1]  # reflection correction
    rot = v @ u.T
    return RigidTransform(rot, cb - rot @ ca)


def icp_point_to_point(
    source: PointCloud,
    target: PointCloud,
    init: RigidTransform,
    params: IcpParams,
) -> IcpResult:
    """Iterative closest point from an initial guess.

    Each iteration matches every transformed source point to its nearest
    target point, discards matches beyond the cutoff, solves the
    closed-form update, and composes it onto the running transform. Stops
    when the RMS residual change drops below convergence_eps, iterations
    run out, or fewer than 3 correspondences survive (starved flag).
    """
    src = source.points
    tree = cKDTree(target.points)
    workers = query_workers()
    total = init
    history: list[float] = []
    prev_rms = None
    starved = False
    iterations = 0

    for iterations in range(1, params.max_iterations + 1):
        moved = apply_to_points(total, src)
        dist, nearest = tree.query(moved, k=1, workers=workers)
        keep = dist <= params.correspondence_cutoff
        if int(keep.sum()) < 3:
            starved = True
            iterations -= 1
            break
        a = moved[keep]
        b = target.points[nearest[keep]]
        step = _least_squares_motion(a, b)
        total = compose(step, total)
        resid = apply_to_points(step, a) - b
        rms = float(np.sqrt(np.einsum("ij,ij->i", resid, resid).mean()))
        history.append(rms)
        if prev_rms is not None and abs(prev_rms - rms) < params.convergence_eps:
            break
        prev_rms = rms

    final = history[-1] if history else math.inf
    return IcpResult(
        transform=total,
        rms_residual=final,
        iterations=iterations,
        residual_history=tuple(history),
        starved=starved,
    )


def chamfer_distance(a: PointCloud, b: PointCloud) -> float:
    """Symmetric mean of squared nearest-neighbor distances.

    CD(A, B) = mean_a min_b |a - b|^2 + mean_b min_a |b - a|^2.
    Means (rather than sums) keep large regions from dominating scores
    purely by point count.
    """
    workers = query_workers()
    d_ab, _ = cKDTree(b.points).query(a.points, k=1, workers=workers)
    d_ba, _ = cKDTree(a.points).query(b.points, k=1, workers=workers)
    return float(np.mean(d_ab * d_ab) + np.mean(d_ba * d_ba))


_SIGN_CANDIDATES = (
    (1.0, 1.0, 1.0),
    (1.0, -1.0, -1.0),
    (-1.0, 1.0, -1.0),
    (-1.0, -1.0, 1.0),
)

# When the two largest covariance eigenvalues are within this factor, the
# leading eigenvectors are not meaningfully unique (any rotated basis of
# the eigenspace is as principal), so extra in-plane spins are seeded.
INPLANE_DEGENERATE_RATIO = 1.6
_SPIN_ANGLES_DEG = (45.0, 90.0, 135.0, 225.0, 270.0, 315.0)


def _principal_frame(points: np.ndarray):
    """Right-handed principal axes (columns, descending variance) and centroid."""
    centroid = points.mean(axis=0)
    centered = points - centroid
    cov = centered.T @ centered / points.shape[0]
    evals, evecs = np.linalg.eigh(cov)
    evals = evals[::-1]
    frame = evecs[:, ::-1]
    if np.linalg.det(frame) < 0.0:
        frame = frame.copy()
        frame[:, -1] = -frame[:, -1]
    return frame, evals, centroid


def initial_alignments(rp: PointCloud, rq: PointCloud) -> list[RigidTransform]:
    """Deterministic ICP seeds mapping region rq toward region rp.

    Principal-axis alignment admits a sign ambiguity per axis; the four
    proper combinations come first. When the two leading eigenvalues of
    either region nearly tie (common for fracture faces, which are close
    to planar discs), the eigenbasis is only defined up to an in-plane
    spin, so additional candidates rotated about the weakest axis are
    appended. Regions whose covariance is rank-deficient (below rank 2)
    fall back to a single centroid-to-centroid translation.
    """
    frame_p, evals_p, cp = _principal_frame(rp.points)
    frame_q, evals_q, cq = _principal_frame(rq.points)

    def rank_deficient(evals) -> bool:
        return evals[0] <= 0.0 or evals[1] <= DEGENERATE_AXIS_RATIO * evals[0]

    if rank_deficient(evals_p) or rank_deficient(evals_q):
        return [RigidTransform(np.eye(3), cp - cq)]

    def candidate(mid: np.ndarray) -> RigidTransform:
        rot = frame_p @ mid @ frame_q.T
        return RigidTransform(rot, cp - rot @ cq)

    out = [candidate(np.diag(signs)) for signs in _SIGN_CANDIDATES]

    spin_ambiguous = (
        evals_p[0] < INPLANE_DEGENERATE_RATIO * evals_p[1]
        or evals_q[0] < INPLANE_DEGENERATE_RATIO * evals_q[1]
    )
    if spin_ambiguous:
        flip = np.diag([1.0, -1.0, -1.0])
        for angle_deg in _SPIN_ANGLES_DEG:
            t = math.radians(angle_deg)
            spin = np.array([
                [math.cos(t), -math.sin(t), 0.0],
                [math.sin(t), math.cos(t), 0.0],
                [0.0, 0.0, 1.0],
            ])
            out.append(candidate(spin))
            out.append(candidate(spin @ flip))
    return out


@dataclass(frozen=True)
class MatchResult:
    """Outcome of registering one Q region onto one P region."""

    region_p: int
    region_q: int
    transform: RigidTransform
    chamfer: float
    icp_iterations_used: int

    def __post_init__(self):
        if not math.isfinite(self.chamfer) or self.chamfer < 0.0:
            raise ValueError(f"chamfer must be finite and non-negative, got {self.chamfer}")


def match_regions(
    p_cloud: PointCloud,
    q_cloud: PointCloud,
    p_seg: RegionSegmentation,
    q_seg: RegionSegmentation,
    retained_p: list[int],
    retained_q: list[int],
    params: IcpParams,
) -> tuple[MatchResult, list[MatchResult]]:
    """Exhaustive search over retained region pairs.

    Every (i, j) pair is attempted from every initial alignment; the
    candidate with the lowest post-ICP Chamfer distance represents the
    pair. The best pair globally minimizes Chamfer, ties broken by smaller
    p id, then smaller q id, then lower candidate index. Returns the best
    result and all pair results sorted ascending by score.
    """
    if not retained_p or not retained_q:
        raise ValueError("no retained regions to match")

    results: list[MatchResult] = []
    for i in retained_p:
        rp = p_cloud.select(p_seg.regions[i], source_id=f"{p_cloud.source_id}:r{i}")
        for j in retained_q:
            rq = q_cloud.select(q_seg.regions[j], source_id=f"{q_cloud.source_id}:r{j}")
            best_pair: MatchResult | None = None
            for init in initial_alignments(rp, rq):
                icp = icp_point_to_point(rq, rp, init, params)
                moved = apply_transform(icp.transform, rq)
                score = chamfer_distance(moved, rp)
                if best_pair is None or score < best_pair.chamfer:
                    best_pair = MatchResult(
                        region_p=i,
                        region_q=j,
                        transform=icp.transform,
                        chamfer=score,
                        icp_iterations_used=icp.iterations,
                    )
            results.append(best_pair)

    ordered = sorted(results, key=lambda m: (m.chamfer, m.region_p, m.region_q))
    return ordered[0], ordered


def align_fragments(p_cloud: PointCloud, q_cloud: PointCloud, best: MatchResult) -> PointCloud:
    """Move the whole Q fragment by the winning region-pair transform."""
    return apply_transform(best.transform, q_cloud)
