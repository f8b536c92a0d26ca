"""The whole flow through files: synthbreak a cloud, assemble it, evaluate.

Equivalent to the CLI sequence

    reassembly synthbreak source.ply --out frac --seed 4
    reassembly assemble frac/fragment_a.ply frac/fragment_b.ply --out result
    reassembly evaluate result/transform.json frac/gt_relative.json

but driven through the Python API so the intermediate numbers are visible.
"""

import json
import math
import tempfile
from pathlib import Path

import numpy as np

from reassembly import (
    PlaneCut,
    PipelineConfig,
    generate_fracture,
    read_transform,
    run_pipeline,
    sample_fractured_primitive,
    write_point_cloud,
)
from reassembly.metrics import rotation_rmse, translation_rmse

DIAG = math.sqrt(3.0)

cut = PlaneCut(origin=[0.0, 0.0, 0.12],
               normal=[math.sin(0.3), 0.0, math.cos(0.3)])
source = sample_fractured_primitive(
    "cylinder", 20000, cut, jitter_amp=0.02 * DIAG, seed=4,
    relief_scale=DIAG, relief_freqs=(1.5, 3.0),
)
fracture = generate_fracture(
    source, cut, jitter_amp=0.02 * DIAG, pose_seed=4,
    relief_scale=DIAG, relief_freqs=(1.5, 3.0),
)

workdir = Path(tempfile.mkdtemp(prefix="reassembly_demo_"))
write_point_cloud(fracture.fragment_a, workdir / "a.ply", format="binary", double_precision=True)
write_point_cloud(fracture.fragment_b, workdir / "b.ply", format="binary", double_precision=True)
print(f"working directory: {workdir}")

transform, report = run_pipeline(
    workdir / "a.ply", workdir / "b.ply",
    PipelineConfig(),  # the synthetic preset
    out_dir=workdir / "result",
    debug_exports=True,
)

print("stage counts:")
print(json.dumps(report.counts, indent=2))
print(f"best match: {report.best}")

pred = read_transform(workdir / "result" / "transform.json")
rot = rotation_rmse(pred, fracture.gt_relative)
tra = translation_rmse(pred, fracture.gt_relative, normalizer=fracture.source_diagonal)
print(f"rotation error {rot:.2f} deg, normalized translation error {tra:.4f}")
print(f"outputs (aligned cloud, report, colored debug dumps) in {workdir / 'result'}")
