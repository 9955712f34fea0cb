"""SDASS 3D local surface descriptor and its evaluation toolkit."""

__version__ = "0.1.0"

from .axes import (LraVariant, LmaField, angle_error, compute_lma, compute_lra, compute_rn_normal,
                   covariance_matrix, disambiguate_sign, repeatability)
from .baselines import SpinImageParams, compute_spin_image
from .descriptor import FeatureVector, SdassParams, compute_sdass, describe_keypoints, redundant_bin_mask
from .eigen import min_eigvec
from .pointcloud import (PointCloud, RigidTransform, SpatialIndex, TriangleMesh, apply_transform,
                         estimate_mesh_resolution, radius_neighbors)
from .ply import load_ply, save_ply

__all__ = [
    "LraVariant", "LmaField", "angle_error", "compute_lma", "compute_lra", "compute_rn_normal",
    "covariance_matrix", "disambiguate_sign", "repeatability",
    "SpinImageParams", "compute_spin_image",
    "FeatureVector", "SdassParams", "compute_sdass", "describe_keypoints", "redundant_bin_mask",
    "min_eigvec",
    "PointCloud", "RigidTransform", "SpatialIndex", "TriangleMesh", "apply_transform",
    "estimate_mesh_resolution", "radius_neighbors",
    "load_ply", "save_ply",
]
