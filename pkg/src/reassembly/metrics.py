"""Ground-truth error metrics for pairwise assembly.

The benchmark-style metrics are defined over multi-part sets; with exactly
two parts, fixing fragment A as the reference frame makes the relative
pose the entire prediction, so the rotation error reduces to the geodesic
angle of R_pred^T R_gt (in degrees) and the translation error to the RMS
of the three components of the translation difference. Whether published
numbers use this exact rotation convention is not documented anywhere;
the geodesic angle is exposed, and no attempt is made to reproduce any
published table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .transforms import RigidTransform, geodesic_rotation_angle


@dataclass(frozen=True)
class GroundTruthPose:
    """Pose that carried a fragment from the assembled frame to its scrambled frame."""

    transform: RigidTransform


def rotation_rmse(pred: RigidTransform, gt: RigidTransform) -> float:
    """Relative rotation magnitude in degrees (pairwise reduction of the RMSE)."""
    return geodesic_rotation_angle(pred, gt)


def translation_rmse(pred: RigidTransform, gt: RigidTransform, normalizer: float | None = None) -> float:
    """RMS over the 3 components of the translation difference.

    Equals |t_pred - t_gt| / sqrt(3); divided by `normalizer` (for example
    a bounding-box diagonal) when one is given.
    """
    err = float(np.linalg.norm(pred.translation - gt.translation)) / np.sqrt(3.0)
    if normalizer is not None:
        if normalizer <= 0.0:
            raise ValueError(f"normalizer must be positive, got {normalizer}")
        err /= normalizer
    return err
