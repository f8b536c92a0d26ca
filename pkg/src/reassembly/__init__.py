"""Pairwise reassembly of broken 3D objects from point clouds.

The pipeline detects breaking curves (points on 3D edges) from the
eigenstructure of local neighbor covariances, segments each fragment into
regions bounded by those curves, exhaustively registers region pairs
across the two fragments with ICP scored by Chamfer distance, and aligns
the fragments with the winning pair's rigid transform.
"""

from .cloud import Aabb, PointCloud
from .config import IcpConfig, PipelineConfig, config_from_preset, load_config
from .curves import (
    BreakingCurveSet,
    CornerPenaltyField,
    corner_penalty,
    refine_curves,
    symmetric_eigvals3,
    threshold_curve_points,
)
from .errors import PipelineError, PlyError, ReassemblyError, TransformIOError
from .graph import (
    NeighborhoodGraph,
    SpatialIndex,
    build_graph,
    connected_components,
    estimate_epsilon,
)
from .metrics import GroundTruthPose, rotation_rmse, translation_rmse
from .pipeline import PipelineReport, preprocess, process_fragment, run_pipeline
from .ply_io import (
    CURVE_LABEL,
    LabeledCloudExport,
    read_point_cloud,
    read_transform,
    write_labeled_cloud,
    write_point_cloud,
    write_transform,
)
from .registration import (
    IcpParams,
    IcpResult,
    MatchResult,
    align_fragments,
    chamfer_distance,
    icp_point_to_point,
    initial_alignments,
    match_regions,
)
from .segmentation import (
    UNASSIGNED,
    RegionSegmentation,
    assign_curve_points,
    filter_small_regions,
    grow_regions,
)
from .synthetic import (
    PlaneCut,
    SyntheticFracture,
    cut_signed_distance,
    evaluate_pair,
    generate_fracture,
    sample_fractured_primitive,
    sample_primitive_surface,
)
from .transforms import (
    RigidTransform,
    apply_to_points,
    apply_transform,
    compose,
    geodesic_rotation_angle,
    inverse,
    random_rotation,
)

__version__ = "0.1.0"
