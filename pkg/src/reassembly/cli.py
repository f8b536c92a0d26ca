"""Command-line interface.

Subcommands:
  assemble A.ply B.ply --out DIR   full pipeline, writes the aligning transform
  segment A.ply --out DIR          curves + segmentation only, colored exports
  synthbreak SRC.ply --out DIR     split a cloud into a scrambled ground-truth pair
  evaluate PRED.json GT.json       rotation/translation error between transforms

Exit codes: 0 success, 1 usage error (bad flags, missing files, bad
config), 2 pipeline failure. Every pipeline parameter is settable by flag;
flags override the config file, which overrides the preset.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import PRESETS, load_config
from .errors import PipelineError, ReassemblyError
from .metrics import rotation_rmse, translation_rmse
from .pipeline import _write_debug_exports, process_fragment, run_pipeline
from .ply_io import (
    read_point_cloud,
    read_transform,
    write_point_cloud,
    write_transform,
)
from .synthetic import PlaneCut, generate_fracture

USAGE_ERROR = 1
PIPELINE_ERROR = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits with code 1 on usage errors."""

    def error(self, message):
        raise _UsageError(message)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("pipeline configuration")
    g.add_argument("--config", metavar="FILE", help="TOML config file")
    g.add_argument("--preset", choices=sorted(PRESETS), help="parameter preset")
    g.add_argument("--k", type=int, help="neighbor count for the epsilon estimate")
    g.add_argument("--epsilon-scale", type=float, dest="epsilon_scale")
    g.add_argument("--tau", type=float, help="corner-penalty threshold in (0,1)")
    g.add_argument("--min-component", type=int, dest="min_component")
    g.add_argument("--prune-depth", type=int, dest="prune_depth")
    g.add_argument("--dilate-steps", type=int, dest="dilate_steps")
    g.add_argument("--k-vote", type=int, dest="k_vote")
    g.add_argument("--min-region-fraction", type=float, dest="min_region_fraction")
    g.add_argument("--voxel-size", type=float, dest="voxel_size")
    g.add_argument("--seed", type=int, help="seed echoed into reports")
    g.add_argument("--icp-max-iterations", type=int, dest="icp_max_iterations")
    g.add_argument("--icp-convergence-eps", type=float, dest="icp_convergence_eps")
    g.add_argument("--icp-cutoff", type=float, dest="icp_cutoff",
                   help="absolute correspondence cutoff (model units)")
    g.add_argument("--icp-cutoff-scale", type=float, dest="icp_cutoff_scale",
                   help="correspondence cutoff as a multiple of epsilon")


def _config_from_args(args) -> "PipelineConfig":
    overrides = {
        key: getattr(args, key)
        for key in (
            "k", "epsilon_scale", "tau", "min_component", "prune_depth",
            "dilate_steps", "k_vote", "min_region_fraction", "voxel_size", "seed",
        )
    }
    overrides["icp"] = {
        "max_iterations": args.icp_max_iterations,
        "convergence_eps": args.icp_convergence_eps,
        "cutoff": args.icp_cutoff,
        "cutoff_epsilon_scale": args.icp_cutoff_scale,
    }
    return load_config(args.config, preset=args.preset, overrides=overrides)


def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise _UsageError(f"input file not found: {p}")
    return p


def build_parser() -> _Parser:
    parser = _Parser(prog="reassembly", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p_asm = sub.add_parser("assemble", help="align fragment B onto fragment A")
    p_asm.add_argument("fragment_a")
    p_asm.add_argument("fragment_b")
    p_asm.add_argument("--out", required=True, help="output directory")
    p_asm.add_argument("--debug-exports", action="store_true",
                       help="write colored per-stage PLY dumps")
    _add_config_flags(p_asm)

    p_seg = sub.add_parser("segment", help="run curves + segmentation on one cloud")
    p_seg.add_argument("fragment")
    p_seg.add_argument("--out", required=True, help="output directory")
    _add_config_flags(p_seg)

    p_syn = sub.add_parser("synthbreak", help="make a scrambled ground-truth pair")
    p_syn.add_argument("source")
    p_syn.add_argument("--out", required=True, help="output directory")
    p_syn.add_argument("--seed", type=int, default=0)
    p_syn.add_argument("--jitter", type=float, default=0.0,
                       help="cut relief amplitude (model units)")
    p_syn.add_argument("--max-angle", type=float, default=60.0, dest="max_angle")
    p_syn.add_argument("--max-shift", type=float, default=0.3, dest="max_shift",
                       help="fraction of the bounding-box diagonal")
    p_syn.add_argument("--cut-origin", dest="cut_origin", metavar="X,Y,Z",
                       help="point on the cut plane (default: cloud centroid)")
    p_syn.add_argument("--cut-normal", dest="cut_normal", metavar="X,Y,Z",
                       help="cut plane normal (default: seeded random)")

    p_eval = sub.add_parser("evaluate", help="compare predicted and ground-truth transforms")
    p_eval.add_argument("pred")
    p_eval.add_argument("gt")
    p_eval.add_argument("--normalizer", type=float, default=None,
                        help="divide the translation error by this (e.g., bbox diagonal)")
    p_eval.add_argument("--run-report", dest="run_report", metavar="REPORT_JSON",
                        help="assemble report to merge (adds chamfer, region counts, "
                             "runtime and the parameter echo to the metrics)")
    p_eval.add_argument("--out", dest="out_file", metavar="FILE",
                        help="also write the metrics JSON to this file")
    return parser


def _parse_vec(text: str, name: str) -> np.ndarray:
    try:
        parts = [float(v) for v in text.split(",")]
    except ValueError:
        raise _UsageError(f"{name} must be X,Y,Z, got {text!r}") from None
    if len(parts) != 3:
        raise _UsageError(f"{name} must have exactly 3 components, got {len(parts)}")
    return np.asarray(parts)


def _cmd_assemble(args) -> int:
    _require_file(args.fragment_a)
    _require_file(args.fragment_b)
    config = _config_from_args(args)
    transform, report = run_pipeline(
        args.fragment_a, args.fragment_b, config,
        out_dir=args.out, debug_exports=args.debug_exports,
    )
    best = report.best
    print(
        f"best match: region {best['region_p']} <- region {best['region_q']} "
        f"(chamfer {best['chamfer']:.6g}, {best['icp_iterations']} ICP iterations)"
    )
    print(f"outputs written to {args.out}")
    return 0


def _cmd_segment(args) -> int:
    _require_file(args.fragment)
    config = _config_from_args(args)
    cloud = read_point_cloud(args.fragment)
    stages = process_fragment(cloud, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_debug_exports(out, "a", stages)
    summary = {"counts": stages.counts(), "config": config.to_dict()}
    with open(out / "segmentation.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(
        f"{stages.counts()['regions']} regions, "
        f"{stages.counts()['curve_refined']} curve points; outputs in {args.out}"
    )
    return 0


def _cmd_synthbreak(args) -> int:
    _require_file(args.source)
    source = read_point_cloud(args.source)
    rng = np.random.default_rng(np.random.SeedSequence([0xC07, args.seed & 0xFFFFFFFF]))
    if args.cut_normal is not None:
        normal = _parse_vec(args.cut_normal, "--cut-normal")
    else:
        normal = rng.normal(size=3)
    if args.cut_origin is not None:
        origin = _parse_vec(args.cut_origin, "--cut-origin")
    else:
        origin = source.points.mean(axis=0)
    cut = PlaneCut(origin, normal)

    fracture = generate_fracture(
        source, cut,
        jitter_amp=args.jitter,
        pose_seed=args.seed,
        max_angle_deg=args.max_angle,
        max_shift=args.max_shift,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_point_cloud(fracture.fragment_a, out / "fragment_a.ply", format="binary", double_precision=True)
    write_point_cloud(fracture.fragment_b, out / "fragment_b.ply", format="binary", double_precision=True)
    write_transform(fracture.gt_relative, out / "gt_relative.json")
    meta = {
        "seed": fracture.seed,
        "jitter_amp": fracture.jitter_amp,
        "cut_origin": [float(v) for v in cut.origin],
        "cut_normal": [float(v) for v in cut.normal],
        "max_angle_deg": args.max_angle,
        "max_shift": args.max_shift,
        "points_a": len(fracture.fragment_a),
        "points_b": len(fracture.fragment_b),
        "source_diagonal": fracture.source_diagonal,
    }
    with open(out / "fracture.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(
        f"wrote fragments ({meta['points_a']} + {meta['points_b']} points) "
        f"and ground truth to {args.out}"
    )
    return 0


def _cmd_evaluate(args) -> int:
    _require_file(args.pred)
    _require_file(args.gt)
    pred = read_transform(args.pred)
    gt = read_transform(args.gt)
    result = {
        "rot_err_deg": rotation_rmse(pred, gt),
        "trans_err": translation_rmse(pred, gt, normalizer=args.normalizer),
    }
    if args.run_report:
        report_path = _require_file(args.run_report)
        with open(report_path) as fh:
            report = json.load(fh)
        result.update({
            "chamfer_best": report.get("best", {}).get("chamfer"),
            "regions_p": report.get("counts", {}).get("a", {}).get("regions"),
            "regions_q": report.get("counts", {}).get("b", {}).get("regions"),
            "runtime_ms": sum(report.get("timings_ms", {}).values()),
            "parameters": report.get("config"),
        })
    text = json.dumps(result, indent=2, sort_keys=True)
    print(text)
    if args.out_file:
        with open(args.out_file, "w") as fh:
            fh.write(text + "\n")
    return 0


_COMMANDS = {
    "assemble": _cmd_assemble,
    "segment": _cmd_segment,
    "synthbreak": _cmd_synthbreak,
    "evaluate": _cmd_evaluate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return USAGE_ERROR
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except PipelineError as exc:
        print(f"pipeline failure: {exc}", file=sys.stderr)
        return PIPELINE_ERROR
    except ReassemblyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return PIPELINE_ERROR
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return PIPELINE_ERROR


def entry() -> None:
    sys.exit(main())
