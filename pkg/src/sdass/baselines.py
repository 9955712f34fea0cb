"""Spin-image baseline built on the same LRA and support region as SDASS."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from .descriptor import FeatureVector
from .errors import EmptyFeatureError
from .pointcloud import PointCloud


@dataclass(frozen=True)
class SpinImageParams:
    support_radius_mr: float = 20.0
    bins: int = 15

    def __post_init__(self):
        if self.bins < 1 or int(self.bins) != self.bins:
            raise ValueError("bins must be a positive integer")
        if self.support_radius_mr <= 0:
            raise ValueError("support radius must be positive")

    @property
    def length(self) -> int:
        return self.bins * self.bins

    def as_dict(self) -> dict:
        return {"support_radius_mr": self.support_radius_mr, "bins": self.bins}


def spin_coordinates(points: ArrayLike, p: ArrayLike, lra: ArrayLike):
    """(alpha, beta): distance from the axis line and signed height along it."""
    d = np.asarray(points, dtype=np.float64).reshape(-1, 3) - np.asarray(p, dtype=np.float64)
    n = np.asarray(lra, dtype=np.float64)
    beta = d @ n
    alpha = np.linalg.norm(d - beta[:, None] * n, axis=1)
    return alpha, beta


def compute_spin_image(
    cloud: PointCloud, keypoint: ArrayLike, lra: ArrayLike, params: SpinImageParams, mr: float
) -> FeatureVector:
    """``bins x bins`` grid over alpha in [0, R] (rows) and beta in [-R, R] (columns).

    Plain accumulation with ceil-based 1-indexed bins as in SDASS; index 0
    clamps to the first bin.
    """
    p = np.asarray(keypoint, dtype=np.float64).reshape(3)
    radius = params.support_radius_mr * mr
    idx = cloud.index.radius(p, radius)
    if idx.size == 0:
        raise EmptyFeatureError("empty spin-image support")
    alpha, beta = spin_coordinates(cloud.points[idx], p, lra)
    b = params.bins
    ia = np.clip(np.ceil(alpha * b / radius), 1, b).astype(np.intp) - 1
    ib = np.clip(np.ceil((beta + radius) * b / (2 * radius)), 1, b).astype(np.intp) - 1
    hist = np.bincount(ia * b + ib, minlength=b * b).astype(np.float64)
    return FeatureVector(hist / hist.sum(), n_points=int(idx.size), lra=np.asarray(lra, dtype=np.float64))
