"""End-to-end orchestration: fragments in, aligning transform out.

The run proceeds per fragment through preprocess, graph construction,
corner penalty, thresholding, curve refinement, region growing and curve
absorption; then small regions are discarded, every retained region pair
is registered exhaustively, and the winning pair's transform aligns the
whole second fragment. Stage failures surface as PipelineError with the
stage name; "no candidate regions" is the documented outcome of an
over-aggressive threshold. Runs are deterministic for fixed inputs and
configuration, regardless of worker count.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cloud import PointCloud
from .config import PipelineConfig, resolve_correspondence_cutoff
from .curves import BreakingCurveSet, CornerPenaltyField, corner_penalty, refine_curves, threshold_curve_points
from .errors import PipelineError, ReassemblyError
from .graph import NeighborhoodGraph, build_graph, write_edge_list
from .ply_io import (
    CURVE_LABEL,
    LabeledCloudExport,
    read_point_cloud,
    write_labeled_cloud,
    write_point_cloud,
    write_transform,
)
from .registration import IcpParams, MatchResult, align_fragments, match_regions
from .segmentation import (
    UNASSIGNED,
    RegionSegmentation,
    assign_curve_points,
    filter_small_regions,
    grow_regions,
)
from .transforms import RigidTransform


def preprocess(c: PointCloud, voxel_size: float | None = None) -> PointCloud:
    """Remove exact duplicate points; optionally voxel-downsample.

    Duplicates keep their first occurrence, preserving order. Voxel
    downsampling replaces each occupied cell of a grid anchored at the
    bounding-box min corner with the centroid of its points; output cells
    are ordered by first point occurrence.
    """
    pts = c.points
    _, first = np.unique(pts, axis=0, return_index=True)
    if first.shape[0] != pts.shape[0]:
        pts = pts[np.sort(first)]

    if voxel_size is not None:
        if voxel_size <= 0.0:
            raise ValueError(f"voxel_size must be positive, got {voxel_size}")
        anchor = pts.min(axis=0)
        cells = np.floor((pts - anchor) / voxel_size).astype(np.int64)
        _, inverse = np.unique(cells, axis=0, return_inverse=True)
        m = int(inverse.max()) + 1
        sums = np.zeros((m, 3))
        np.add.at(sums, inverse, pts)
        counts = np.bincount(inverse, minlength=m)
        centroids = sums / counts[:, None]
        first_seen = np.full(m, pts.shape[0], dtype=np.int64)
        np.minimum.at(first_seen, inverse, np.arange(pts.shape[0]))
        pts = centroids[np.argsort(first_seen, kind="stable")]

    return PointCloud(pts, c.source_id)


@dataclass
class FragmentStages:
    """Everything computed for one fragment up to region filtering."""

    cloud: PointCloud
    points_read: int
    graph: NeighborhoodGraph
    penalty: CornerPenaltyField
    raw_mask: np.ndarray
    curves: BreakingCurveSet
    segmentation_grown: RegionSegmentation
    segmentation: RegionSegmentation
    retained: list[int]

    def counts(self) -> dict:
        return {
            "points_read": self.points_read,
            "points": len(self.cloud),
            "epsilon": self.graph.epsilon,
            "graph_edges": self.graph.num_edges,
            "low_degree_points": self.penalty.low_degree_count,
            "curve_raw": int(self.raw_mask.sum()),
            "curve_refined": self.curves.count,
            "curve_components": len(self.curves.curves),
            "regions": self.segmentation.num_regions,
            "retained_regions": list(self.retained),
        }


class _StageTimer:
    def __init__(self):
        self.timings_ms: dict[str, float] = {}

    def run(self, stage: str, fn, *args, **kwargs):
        start = time.perf_counter()
        try:
            result = fn(*args, **kwargs)
        except PipelineError:
            raise
        except (ReassemblyError, ValueError) as exc:
            raise PipelineError(stage, str(exc)) from exc
        elapsed = (time.perf_counter() - start) * 1000.0
        self.timings_ms[stage] = self.timings_ms.get(stage, 0.0) + elapsed
        return result


def process_fragment(cloud: PointCloud, config: PipelineConfig, timer: _StageTimer | None = None) -> FragmentStages:
    """Run one fragment through preprocessing, curves and segmentation."""
    timer = timer or _StageTimer()
    points_read = len(cloud)
    cloud = timer.run("preprocess", preprocess, cloud, config.voxel_size)
    graph = timer.run("graph", build_graph, cloud, config.k, config.epsilon_scale)
    penalty = timer.run("corner_penalty", corner_penalty, cloud, graph)
    raw_mask = timer.run("threshold", threshold_curve_points, penalty, config.tau)
    curves = timer.run(
        "refine_curves", refine_curves, raw_mask, graph,
        config.min_component, config.prune_depth, config.dilate_steps,
    )
    grown = timer.run("grow_regions", grow_regions, graph, curves)
    segmentation = timer.run(
        "assign_curve_points", assign_curve_points, grown, cloud, curves, config.k_vote,
    )
    retained = timer.run("filter_regions", filter_small_regions, segmentation, config.min_region_fraction)
    return FragmentStages(
        cloud=cloud,
        points_read=points_read,
        graph=graph,
        penalty=penalty,
        raw_mask=raw_mask,
        curves=curves,
        segmentation_grown=grown,
        segmentation=segmentation,
        retained=retained,
    )


@dataclass
class PipelineReport:
    best: dict
    matches: list[dict]
    pairs_evaluated: int
    counts: dict
    timings_ms: dict
    config: dict
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "best": self.best,
            "matches": self.matches,
            "pairs_evaluated": self.pairs_evaluated,
            "counts": self.counts,
            "timings_ms": self.timings_ms,
            "config": self.config,
            "warnings": self.warnings,
        }


def _match_to_dict(m: MatchResult) -> dict:
    return {
        "region_p": m.region_p,
        "region_q": m.region_q,
        "chamfer": m.chamfer,
        "icp_iterations": m.icp_iterations_used,
    }


def _segmentation_labels(stages: FragmentStages, post_voting: bool) -> np.ndarray:
    seg = stages.segmentation if post_voting else stages.segmentation_grown
    labels = seg.region_of.copy()
    labels[labels == UNASSIGNED] = CURVE_LABEL
    return labels


def _write_debug_exports(out_dir, tag: str, stages: FragmentStages) -> None:
    cloud = stages.cloud
    raw_labels = np.where(stages.raw_mask, CURVE_LABEL, 0)
    refined_labels = np.where(stages.curves.member, CURVE_LABEL, 0)
    write_labeled_cloud(LabeledCloudExport(cloud, raw_labels), out_dir / f"{tag}_curves_raw.ply")
    write_labeled_cloud(LabeledCloudExport(cloud, refined_labels), out_dir / f"{tag}_curves.ply")
    write_labeled_cloud(
        LabeledCloudExport(cloud, _segmentation_labels(stages, post_voting=False)),
        out_dir / f"{tag}_segmentation.ply",
    )
    write_labeled_cloud(
        LabeledCloudExport(cloud, _segmentation_labels(stages, post_voting=True)),
        out_dir / f"{tag}_regions.ply",
    )
    write_edge_list(stages.graph, out_dir / f"{tag}_graph_edges.txt")


def _write_matches_csv(path, matches: list[MatchResult]) -> None:
    cols = [f"r{i}{j}" for i in range(3) for j in range(3)]
    header = "region_p,region_q,chamfer,iterations," + ",".join(cols) + ",t0,t1,t2"
    lines = [header]
    for m in matches:
        nums = [repr(float(v)) for v in m.transform.rotation.reshape(9)]
        nums += [repr(float(v)) for v in m.transform.translation]
        lines.append(
            f"{m.region_p},{m.region_q},{m.chamfer!r},{m.icp_iterations_used}," + ",".join(nums)
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def run_pipeline(
    path_a,
    path_b,
    config: PipelineConfig,
    out_dir=None,
    debug_exports: bool = False,
) -> tuple[RigidTransform, PipelineReport]:
    """Assemble two fragment files; returns (transform, report).

    The transform maps fragment B into fragment A's frame. When out_dir is
    given, writes transform.json, b_aligned.ply, report.json, matches.csv
    and, with debug_exports, colored per-stage PLY dumps.
    """
    timer = _StageTimer()
    cloud_a = timer.run("read", read_point_cloud, path_a)
    cloud_b = timer.run("read", read_point_cloud, path_b)

    stages_a = process_fragment(cloud_a, config, timer)
    stages_b = process_fragment(cloud_b, config, timer)

    cutoff = resolve_correspondence_cutoff(config, stages_a.graph.epsilon, stages_b.graph.epsilon)
    params = IcpParams(
        max_iterations=config.icp.max_iterations,
        correspondence_cutoff=cutoff,
        convergence_eps=config.icp.convergence_eps,
    )
    best, all_matches = timer.run(
        "match_regions", match_regions,
        stages_a.cloud, stages_b.cloud,
        stages_a.segmentation, stages_b.segmentation,
        stages_a.retained, stages_b.retained,
        params,
    )
    aligned_b = timer.run("align", align_fragments, stages_a.cloud, stages_b.cloud, best)

    warnings = []
    for tag, stages in (("a", stages_a), ("b", stages_b)):
        if stages.penalty.low_degree_count:
            warnings.append(
                f"fragment {tag}: {stages.penalty.low_degree_count} points had fewer than "
                f"3 graph neighbors and were treated as flat"
            )
        if stages.curves.count == 0:
            warnings.append(f"fragment {tag}: no breaking curves detected")

    report = PipelineReport(
        best=_match_to_dict(best),
        matches=[_match_to_dict(m) for m in all_matches],
        pairs_evaluated=len(all_matches),
        counts={"a": stages_a.counts(), "b": stages_b.counts()},
        timings_ms=timer.timings_ms,
        config=config.to_dict(),
        warnings=warnings,
    )

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_transform(best.transform, out / "transform.json")
        write_point_cloud(aligned_b, out / "b_aligned.ply", format="binary", double_precision=True)
        _write_matches_csv(out / "matches.csv", all_matches)
        if debug_exports:
            _write_debug_exports(out, "a", stages_a)
            _write_debug_exports(out, "b", stages_b)
        with open(out / "report.json", "w") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    return best.transform, report
