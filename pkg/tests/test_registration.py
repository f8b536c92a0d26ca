import math

import numpy as np
import pytest

from reassembly.cloud import PointCloud
from reassembly.registration import (
    IcpParams,
    align_fragments,
    chamfer_distance,
    icp_point_to_point,
    initial_alignments,
    match_regions,
)
from reassembly.segmentation import RegionSegmentation
from reassembly.transforms import (
    RigidTransform,
    apply_transform,
    geodesic_rotation_angle,
    inverse,
    random_rotation,
)

from conftest import random_cloud, random_surface_cloud
from oracles import brute_force_chamfer


def rigid(rng, max_angle=180.0, shift=1.0):
    axis = rng.normal(size=3)
    angle = rng.uniform(0, max_angle)
    return RigidTransform.from_axis_angle(axis, angle, rng.uniform(-shift, shift, 3))


DEFAULT = IcpParams(max_iterations=100, correspondence_cutoff=math.inf, convergence_eps=1e-9)


class TestIcp:
    def test_identical_clouds_stay_put(self, rng):
        c = random_surface_cloud(500, rng)
        res = icp_point_to_point(c, c, RigidTransform.identity(), DEFAULT)
        assert not res.starved
        assert res.rms_residual < 1e-12
        assert np.abs(res.transform.rotation - np.eye(3)).max() < 1e-9
        assert np.abs(res.transform.translation).max() < 1e-9

    def test_recovers_small_perturbation(self, rng):
        c = random_surface_cloud(2000, rng)
        diag = c.aabb().diagonal
        truth = rigid(rng, max_angle=10.0, shift=0.05 * diag)
        target = apply_transform(truth, c)
        # centroid-alignment init
        init = RigidTransform(np.eye(3), target.points.mean(0) - c.points.mean(0))
        res = icp_point_to_point(c, target, init, DEFAULT)
        assert geodesic_rotation_angle(res.transform, truth) < 0.5
        assert np.linalg.norm(res.transform.translation - truth.translation) < 1e-3 * diag

    def test_partial_overlap_converges(self, rng):
        c = random_surface_cloud(2000, rng)
        keep = rng.choice(2000, size=1000, replace=False)
        truth = rigid(rng, max_angle=5.0, shift=0.02)
        target = apply_transform(truth, c.select(np.sort(keep)))
        params = IcpParams(max_iterations=100, correspondence_cutoff=0.1, convergence_eps=1e-9)
        res = icp_point_to_point(c, target, RigidTransform.identity(), params)
        assert geodesic_rotation_angle(res.transform, truth) < 1.0

    def test_residual_history_monotone(self, rng):
        for _ in range(5):
            c = random_surface_cloud(800, rng)
            truth = rigid(rng, max_angle=10.0, shift=0.05)
            target = apply_transform(truth, c)
            res = icp_point_to_point(c, target, RigidTransform.identity(), DEFAULT)
            hist = np.asarray(res.residual_history)
            assert np.all(np.diff(hist) <= 1e-12)

    def test_starved_flag(self, rng):
        a = PointCloud([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]])
        b = PointCloud(np.asarray([[0, 0, 100.0]]))
        params = IcpParams(max_iterations=10, correspondence_cutoff=0.5, convergence_eps=1e-9)
        res = icp_point_to_point(a, b, RigidTransform.identity(), params)
        assert res.starved
        assert res.iterations == 0
        assert math.isinf(res.rms_residual)

    def test_params_validated(self):
        with pytest.raises(ValueError):
            IcpParams(max_iterations=0)
        with pytest.raises(ValueError):
            IcpParams(correspondence_cutoff=0.0)
        with pytest.raises(ValueError):
            IcpParams(convergence_eps=0.0)


class TestChamfer:
    def test_identical_is_zero(self, rng):
        c = random_cloud(100, rng)
        assert chamfer_distance(c, c) == 0.0

    def test_single_pair_analytic(self):
        a = PointCloud([[0.0, 0.0, 0.0]])
        b = PointCloud([[1.0, 0.0, 0.0]])
        assert chamfer_distance(a, b) == pytest.approx(2.0, abs=1e-15)

    def test_matches_brute_force(self, rng):
        for _ in range(10):
            a = random_cloud(int(rng.integers(5, 120)), rng)
            b = random_cloud(int(rng.integers(5, 150)), rng)
            assert chamfer_distance(a, b) == pytest.approx(
                brute_force_chamfer(a.points, b.points), abs=1e-12
            )

    def test_symmetric_and_nonnegative(self, rng):
        a, b = random_cloud(80, rng), random_cloud(90, rng)
        ab = chamfer_distance(a, b)
        assert ab >= 0.0
        assert ab == pytest.approx(chamfer_distance(b, a), abs=1e-12)

    def test_rigid_invariance(self, rng):
        a, b = random_cloud(80, rng), random_cloud(90, rng)
        t = rigid(rng)
        assert chamfer_distance(apply_transform(t, a), apply_transform(t, b)) == pytest.approx(
            chamfer_distance(a, b), abs=1e-9
        )


class TestInitialAlignments:
    def anisotropic_cloud(self, rng, n=400):
        pts = rng.normal(size=(n, 3)) * np.array([3.0, 1.7, 0.6])
        return PointCloud(pts)

    def test_translated_copy_first_candidate_exact(self, rng):
        rp = self.anisotropic_cloud(rng)
        rq = PointCloud(rp.points - [5.0, 2.0, 1.0])
        cands = initial_alignments(rp, rq)
        first = cands[0]
        assert np.abs(first.rotation - np.eye(3)).max() < 1e-9
        assert np.allclose(first.translation, [5.0, 2.0, 1.0], atol=1e-9)

    def test_rotated_copy_covered_by_some_candidate(self, rng):
        rp = self.anisotropic_cloud(rng)
        truth = RigidTransform.from_axis_angle([0, 0, 1], 90.0)
        rq = apply_transform(inverse(truth), rp)
        cands = initial_alignments(rp, rq)
        best = min(np.abs(c.rotation - truth.rotation).max() for c in cands)
        assert best < 1e-6

    def test_all_candidates_proper(self, rng):
        rp = self.anisotropic_cloud(rng)
        rq = PointCloud(rng.normal(size=(300, 3)))
        for cand in initial_alignments(rp, rq):
            assert np.linalg.det(cand.rotation) == pytest.approx(1.0, abs=1e-9)

    def test_rank_deficient_falls_back_to_centroids(self, rng):
        line = np.column_stack([np.linspace(0, 1, 50), np.zeros(50), np.zeros(50)])
        rp = self.anisotropic_cloud(rng)
        rq = PointCloud(line + [2.0, 0.0, 0.0])
        cands = initial_alignments(rp, rq)
        assert len(cands) == 1
        assert np.allclose(cands[0].rotation, np.eye(3))

    def test_planar_disc_gets_spin_candidates(self, rng):
        theta = rng.uniform(0, 2 * np.pi, 300)
        r = np.sqrt(rng.uniform(0, 1, 300))
        disc = np.column_stack([r * np.cos(theta), r * np.sin(theta), np.zeros(300)])
        rp = PointCloud(disc)
        rq = PointCloud(disc + [3.0, 0, 0])
        cands = initial_alignments(rp, rq)
        assert len(cands) == 16
        # deterministic ordering: base sign candidates come first
        assert np.abs(cands[0].rotation - np.eye(3)).max() < 1e-6


def two_region_segmentation(points_by_region):
    pts = np.vstack(points_by_region)
    region_of = np.concatenate(
        [np.full(len(p), i) for i, p in enumerate(points_by_region)]
    )
    regions = [np.flatnonzero(region_of == i) for i in range(len(points_by_region))]
    sizes = np.asarray([len(r) for r in regions])
    return PointCloud(pts), RegionSegmentation(region_of, regions, sizes)


class TestMatchRegions:
    def test_exact_copy_single_pair(self, rng):
        shape = rng.normal(size=(400, 3)) * [2.0, 1.1, 0.4]
        truth = rigid(rng, max_angle=50.0, shift=0.5)
        p_cloud, p_seg = two_region_segmentation([shape])
        q_cloud, q_seg = two_region_segmentation([apply_transform(inverse(truth), PointCloud(shape)).points])
        best, results = match_regions(p_cloud, q_cloud, p_seg, q_seg, [0], [0], DEFAULT)
        assert len(results) == 1
        assert best.chamfer < 1e-9
        assert np.abs(best.transform.rotation - truth.rotation).max() < 1e-6
        assert np.abs(best.transform.translation - truth.translation).max() < 1e-6

    def test_two_by_two_picks_the_matching_pair(self, rng):
        box = rng.uniform(-1, 1, size=(300, 3)) * [2.0, 1.0, 0.3]
        blob = rng.normal(size=(300, 3)) * [0.6, 0.6, 0.6]
        ridge = np.column_stack([
            rng.uniform(-2, 2, 300),
            0.3 * np.sin(3.0 * rng.uniform(-2, 2, 300)),
            rng.uniform(0, 0.2, 300),
        ])
        truth = rigid(rng, max_angle=40.0, shift=0.3)
        moved_box = apply_transform(inverse(truth), PointCloud(box)).points

        p_cloud, p_seg = two_region_segmentation([box, blob])
        q_cloud, q_seg = two_region_segmentation([ridge, moved_box])
        best, results = match_regions(p_cloud, q_cloud, p_seg, q_seg, [0, 1], [0, 1], DEFAULT)
        assert len(results) == 4
        assert (best.region_p, best.region_q) == (0, 1)
        assert geodesic_rotation_angle(best.transform, truth) < 1.0

    def test_deterministic_repeat(self, rng):
        shape = rng.normal(size=(200, 3)) * [1.5, 0.9, 0.4]
        other = rng.normal(size=(200, 3))
        p_cloud, p_seg = two_region_segmentation([shape])
        q_cloud, q_seg = two_region_segmentation([other])
        best1, _ = match_regions(p_cloud, q_cloud, p_seg, q_seg, [0], [0], DEFAULT)
        best2, _ = match_regions(p_cloud, q_cloud, p_seg, q_seg, [0], [0], DEFAULT)
        assert np.array_equal(best1.transform.rotation, best2.transform.rotation)
        assert np.array_equal(best1.transform.translation, best2.transform.translation)
        assert best1.chamfer == best2.chamfer

    def test_results_sorted_by_chamfer(self, rng):
        a = rng.normal(size=(150, 3)) * [2.0, 1.0, 0.5]
        b = rng.normal(size=(150, 3)) * [1.0, 2.0, 0.5]
        c = rng.normal(size=(150, 3))
        p_cloud, p_seg = two_region_segmentation([a, b])
        q_cloud, q_seg = two_region_segmentation([c])
        _, results = match_regions(p_cloud, q_cloud, p_seg, q_seg, [0, 1], [0], DEFAULT)
        chamfers = [r.chamfer for r in results]
        assert chamfers == sorted(chamfers)

    def test_empty_retained_rejected(self, rng):
        cloud, seg = two_region_segmentation([rng.normal(size=(50, 3))])
        with pytest.raises(ValueError, match="no retained regions"):
            match_regions(cloud, cloud, seg, seg, [], [0], DEFAULT)


class TestAlignFragments:
    def test_identity_match_keeps_cloud(self, rng):
        c = random_cloud(100, rng)
        from reassembly.registration import MatchResult

        best = MatchResult(0, 0, RigidTransform.identity(), 0.0, 1)
        out = align_fragments(c, c, best)
        assert np.array_equal(out.points, c.points)

    def test_chamfer_reproducible_from_moved_regions(self, rng):
        shape = rng.normal(size=(300, 3)) * [2.0, 1.0, 0.4]
        truth = rigid(rng, max_angle=30.0, shift=0.4)
        p_cloud, p_seg = two_region_segmentation([shape])
        q_cloud, q_seg = two_region_segmentation(
            [apply_transform(inverse(truth), PointCloud(shape)).points]
        )
        best, _ = match_regions(p_cloud, q_cloud, p_seg, q_seg, [0], [0], DEFAULT)
        moved = align_fragments(p_cloud, q_cloud, best)
        again = chamfer_distance(
            moved.select(q_seg.regions[0]), p_cloud.select(p_seg.regions[0])
        )
        assert again == pytest.approx(best.chamfer, abs=1e-9)
