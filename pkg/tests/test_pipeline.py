import json
import math

import numpy as np
import pytest

from reassembly.cli import main
from reassembly.cloud import PointCloud
from reassembly.config import PipelineConfig, config_from_preset, load_config
from reassembly.errors import PipelineError
from reassembly.pipeline import preprocess, process_fragment, run_pipeline
from reassembly.ply_io import read_point_cloud, read_transform, write_point_cloud
from reassembly.synthetic import evaluate_pair

from conftest import build_fracture_case, cube_edge_cut

SMALL_CASE_POINTS = 7000


@pytest.fixture(scope="module")
def small_fracture(tmp_path_factory):
    """A modest planar fracture pair on disk, plus its ground truth."""
    frac = build_fracture_case("cube", cube_edge_cut, seed=0, n_points=SMALL_CASE_POINTS)
    d = tmp_path_factory.mktemp("fracture")
    write_point_cloud(frac.fragment_a, d / "a.ply", format="binary", double_precision=True)
    write_point_cloud(frac.fragment_b, d / "b.ply", format="binary", double_precision=True)
    return d, frac


class TestPreprocess:
    def test_identity_without_duplicates(self, rng):
        c = PointCloud(rng.uniform(size=(100, 3)))
        out = preprocess(c)
        assert np.array_equal(out.points, c.points)

    def test_exact_duplicates_collapse_keeping_first(self):
        c = PointCloud([[0, 0, 0], [1, 1, 1], [0, 0, 0], [2, 2, 2]])
        out = preprocess(c)
        assert np.array_equal(out.points, [[0, 0, 0], [1, 1, 1], [2, 2, 2]])

    def test_voxel_grid_counting(self):
        side = 20
        axis = np.arange(side) / side
        grid = np.stack(np.meshgrid(axis, axis, axis), -1).reshape(-1, 3)
        c = PointCloud(grid)
        out = preprocess(c, voxel_size=2.0 / side)
        ratio = len(c) / len(out)
        assert ratio == pytest.approx(8.0, rel=0.05)

    def test_voxel_centroids(self):
        c = PointCloud([[0.0, 0, 0], [0.2, 0, 0], [3.0, 0, 0]])
        out = preprocess(c, voxel_size=1.0)
        assert np.allclose(out.points[0], [0.1, 0, 0])
        assert np.allclose(out.points[1], [3.0, 0, 0])

    def test_bad_voxel_rejected(self, rng):
        c = PointCloud(rng.uniform(size=(10, 3)))
        with pytest.raises(ValueError, match="voxel_size"):
            preprocess(c, voxel_size=-1.0)


class TestConfig:
    def test_presets_exist(self):
        for preset in ("synthetic", "scanned", "custom"):
            cfg = config_from_preset(preset)
            assert cfg.preset == preset

    def test_unknown_preset_rejected(self):
        with pytest.raises(ValueError, match="unknown preset"):
            config_from_preset("fast")

    def test_file_overrides_preset_and_flags_override_file(self, tmp_path):
        cfg_file = tmp_path / "cfg.toml"
        cfg_file.write_text('preset = "scanned"\ntau = 0.5\n[icp]\nmax_iterations = 7\n')
        cfg = load_config(cfg_file, overrides={"tau": 0.25, "icp": {"cutoff": 2.0}})
        assert cfg.preset == "scanned"
        assert cfg.tau == 0.25
        assert cfg.icp.max_iterations == 7
        assert cfg.icp.cutoff == 2.0
        assert cfg.min_region_fraction == 0.02  # from the scanned preset

    def test_invalid_value_is_pipeline_error(self, tmp_path):
        cfg_file = tmp_path / "cfg.toml"
        cfg_file.write_text("tau = 1.5\n")
        with pytest.raises(PipelineError, match="config"):
            load_config(cfg_file)

    def test_unknown_key_rejected(self, tmp_path):
        cfg_file = tmp_path / "cfg.toml"
        cfg_file.write_text("taau = 0.5\n")
        with pytest.raises(PipelineError, match="unknown config key"):
            load_config(cfg_file)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(PipelineError, match="not found"):
            load_config(tmp_path / "nope.toml")


class TestRunPipeline:
    def test_recovers_synthetic_fracture(self, small_fracture, tmp_path):
        d, frac = small_fracture
        transform, report = run_pipeline(d / "a.ply", d / "b.ply", PipelineConfig(), out_dir=tmp_path)
        rot, tra = evaluate_pair(transform, frac)
        assert rot < 5.0
        assert tra < 0.05
        assert (tmp_path / "transform.json").exists()
        assert (tmp_path / "b_aligned.ply").exists()
        assert (tmp_path / "report.json").exists()
        assert (tmp_path / "matches.csv").exists()
        counts = report.counts
        assert report.pairs_evaluated == len(counts["a"]["retained_regions"]) * len(
            counts["b"]["retained_regions"]
        )
        aligned = read_point_cloud(tmp_path / "b_aligned.ply")
        assert len(aligned) == counts["b"]["points"]

    def test_self_alignment_is_identity(self, small_fracture, tmp_path):
        d, _ = small_fracture
        transform, report = run_pipeline(d / "a.ply", d / "a.ply", PipelineConfig())
        assert report.best["chamfer"] < 1e-9
        assert np.abs(transform.rotation - np.eye(3)).max() < 1e-6
        assert np.abs(transform.translation).max() < 1e-6

    def test_overall_failure_mode_no_regions(self, small_fracture):
        d, _ = small_fracture
        cfg = PipelineConfig(min_region_fraction=0.9)
        with pytest.raises(PipelineError, match=r"\[filter_regions\].*no candidate regions"):
            run_pipeline(d / "a.ply", d / "b.ply", cfg)

    def test_deterministic_outputs(self, small_fracture, tmp_path, monkeypatch):
        d, _ = small_fracture
        outs = []
        for name, workers in (("r1", "1"), ("r2", "2")):
            monkeypatch.setenv("REASSEMBLY_NUM_THREADS", workers)
            out = tmp_path / name
            run_pipeline(d / "a.ply", d / "b.ply", PipelineConfig(), out_dir=out)
            outs.append((out / "transform.json").read_bytes())
        assert outs[0] == outs[1]


class TestDebugExports:
    def test_stage_counts_match_artifacts(self, small_fracture, tmp_path):
        d, _ = small_fracture
        _, report = run_pipeline(
            d / "a.ply", d / "b.ply", PipelineConfig(), out_dir=tmp_path, debug_exports=True
        )
        for tag in ("a", "b"):
            seg = read_point_cloud(tmp_path / f"{tag}_segmentation.ply")
            assert len(seg) == report.counts[tag]["points"]
            curves = (tmp_path / f"{tag}_curves.ply").read_text()
            red = sum(1 for line in curves.splitlines() if line.endswith("255 0 0"))
            assert red == report.counts[tag]["curve_refined"]
            edges = (tmp_path / f"{tag}_graph_edges.txt").read_text().splitlines()
            assert len(edges) == report.counts[tag]["graph_edges"]


class TestCli:
    def test_assemble_round_trip(self, small_fracture, tmp_path, capsys):
        d, frac = small_fracture
        code = main([
            "assemble", str(d / "a.ply"), str(d / "b.ply"), "--out", str(tmp_path / "out"),
        ])
        assert code == 0
        pred = read_transform(tmp_path / "out" / "transform.json")
        rot, tra = evaluate_pair(pred, frac)
        assert rot < 5.0 and tra < 0.05

    def test_missing_input_names_path(self, tmp_path, capsys):
        code = main(["assemble", str(tmp_path / "ghost.ply"), str(tmp_path / "b.ply"),
                     "--out", str(tmp_path)])
        assert code == 1
        assert "ghost.ply" in capsys.readouterr().err

    def test_unknown_flag_is_usage_error(self, tmp_path, capsys):
        code = main(["assemble", "a.ply", "b.ply", "--out", str(tmp_path), "--frobnicate"])
        assert code == 1

    def test_no_command_is_usage_error(self, capsys):
        assert main([]) == 1

    def test_pipeline_failure_exit_code(self, small_fracture, tmp_path):
        d, _ = small_fracture
        code = main([
            "assemble", str(d / "a.ply"), str(d / "b.ply"), "--out", str(tmp_path / "o"),
            "--min-region-fraction", "0.9",
        ])
        assert code == 2

    def test_evaluate_identical_transforms(self, small_fracture, tmp_path, capsys):
        d, _ = small_fracture
        from reassembly.ply_io import write_transform
        from reassembly.transforms import RigidTransform

        t = tmp_path / "t.json"
        write_transform(RigidTransform.identity(), t)
        code = main(["evaluate", str(t), str(t)])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["rot_err_deg"] == pytest.approx(0.0, abs=1e-9)
        assert payload["trans_err"] == 0.0

    def test_synthbreak_then_evaluate(self, tmp_path, rng, capsys):
        src = PointCloud(rng.uniform(-0.5, 0.5, size=(3000, 3)))
        src_path = tmp_path / "src.ply"
        write_point_cloud(src, src_path, format="binary", double_precision=True)
        out = tmp_path / "frac"
        code = main(["synthbreak", str(src_path), "--out", str(out), "--seed", "5",
                     "--jitter", "0.01"])
        assert code == 0
        assert (out / "fragment_a.ply").exists()
        assert (out / "fragment_b.ply").exists()
        meta = json.loads((out / "fracture.json").read_text())
        a = read_point_cloud(out / "fragment_a.ply")
        b = read_point_cloud(out / "fragment_b.ply")
        assert len(a) == meta["points_a"] and len(b) == meta["points_b"]
        assert len(a) + len(b) == 3000
        code = main(["evaluate", str(out / "gt_relative.json"), str(out / "gt_relative.json")])
        assert code == 0

    def test_synthbreak_deterministic(self, tmp_path, rng):
        src = PointCloud(rng.uniform(-0.5, 0.5, size=(2000, 3)))
        src_path = tmp_path / "src.ply"
        write_point_cloud(src, src_path, format="binary", double_precision=True)
        for name in ("f1", "f2"):
            assert main(["synthbreak", str(src_path), "--out", str(tmp_path / name),
                         "--seed", "9"]) == 0
        assert (tmp_path / "f1" / "fragment_a.ply").read_bytes() == \
            (tmp_path / "f2" / "fragment_a.ply").read_bytes()
        assert (tmp_path / "f1" / "gt_relative.json").read_bytes() == \
            (tmp_path / "f2" / "gt_relative.json").read_bytes()

    def test_segment_matches_assemble_segmentation(self, small_fracture, tmp_path):
        d, _ = small_fracture
        out_asm = tmp_path / "asm"
        out_seg = tmp_path / "seg"
        assert main(["assemble", str(d / "a.ply"), str(d / "b.ply"),
                     "--out", str(out_asm), "--debug-exports"]) == 0
        assert main(["segment", str(d / "a.ply"), "--out", str(out_seg)]) == 0
        assert (out_seg / "a_segmentation.ply").read_bytes() == \
            (out_asm / "a_segmentation.ply").read_bytes()
        assert (out_seg / "a_regions.ply").read_bytes() == \
            (out_asm / "a_regions.ply").read_bytes()

    def test_evaluate_with_run_report(self, small_fracture, tmp_path, capsys):
        d, frac = small_fracture
        out = tmp_path / "run"
        assert main(["assemble", str(d / "a.ply"), str(d / "b.ply"), "--out", str(out)]) == 0
        capsys.readouterr()
        from reassembly.ply_io import write_transform

        gt = tmp_path / "gt.json"
        write_transform(frac.gt_relative, gt)
        code = main([
            "evaluate", str(out / "transform.json"), str(gt),
            "--normalizer", str(frac.source_diagonal),
            "--run-report", str(out / "report.json"),
            "--out", str(tmp_path / "metrics.json"),
        ])
        assert code == 0
        metrics = json.loads((tmp_path / "metrics.json").read_text())
        for field in ("rot_err_deg", "trans_err", "chamfer_best", "regions_p",
                      "regions_q", "runtime_ms", "parameters"):
            assert field in metrics
        assert metrics["rot_err_deg"] < 5.0

    def test_config_flag_round_trip(self, small_fracture, tmp_path):
        d, _ = small_fracture
        cfg = tmp_path / "cfg.toml"
        cfg.write_text('preset = "synthetic"\nk = 20\n')
        out = tmp_path / "out"
        code = main(["segment", str(d / "a.ply"), "--out", str(out),
                     "--config", str(cfg), "--tau", "0.97"])
        assert code == 0
        summary = json.loads((out / "segmentation.json").read_text())
        assert summary["config"]["k"] == 20
        assert summary["config"]["tau"] == 0.97
