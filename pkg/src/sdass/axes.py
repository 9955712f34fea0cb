"""Local reference axes (LRA), local minimum axes (LMA) and normals.

All three are the minimum-scatter eigenvector of a neighborhood covariance,
with the sign chosen so the axis points toward the bulk of the neighbors.
They differ only in which radius drives the direction and which the sign.
"""

from __future__ import annotations

import enum
import threading

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .eigen import min_eigvec_batch
from .errors import DegenerateInputError, DegenerateKeypointError
from .pointcloud import PointCloud

LMA_RADIUS_MR = 7.0
RN_RADIUS_MR = 3.0
YANG_SUBSET_FRACTION = 1.0 / 3.0
MIN_NEIGHBORS = 3


class LraVariant(enum.Enum):
    SDASS_FULL_RADIUS = "sdass"  # direction and sign from the full support
    YANG_SUBSET_RADIUS = "yang"  # direction from a sub-radius, sign from the full support


def covariance_matrix(points: ArrayLike) -> NDArray[np.float64]:
    """Unnormalized scatter matrix about the centroid."""
    q = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if q.shape[0] < 3:
        raise DegenerateInputError("covariance needs at least three points")
    d = q - q.mean(axis=0)
    return d.T @ d


def disambiguate_sign(v: ArrayLike, p: ArrayLike, neighbors: ArrayLike) -> NDArray[np.float64]:
    """Flip ``v`` unless it has a non-negative dot product with sum(q_i - p)."""
    v = np.asarray(v, dtype=np.float64)
    q = np.asarray(neighbors, dtype=np.float64).reshape(-1, 3)
    if q.shape[0] == 0:
        raise DegenerateInputError("sign disambiguation needs neighbors")
    s = (q - np.asarray(p, dtype=np.float64)).sum(axis=0)
    return v if float(v @ s) >= 0.0 else -v


def angle_error(v1: ArrayLike, v2: ArrayLike) -> float | NDArray[np.float64]:
    """Angle in radians between axes (row-wise for stacked input).

    Equal to arccos of the normalized dot product; the atan2 form keeps
    full precision near 0 and pi.
    """
    a = np.asarray(v1, dtype=np.float64)
    b = np.asarray(v2, dtype=np.float64)
    out = np.arctan2(np.linalg.norm(np.cross(a, b), axis=-1), np.sum(a * b, axis=-1))
    return float(out) if np.ndim(out) == 0 else out


def repeatability(errors: ArrayLike, threshold: float = np.deg2rad(5.0)) -> float:
    """Fraction of angle errors strictly below ``threshold`` (radians)."""
    e = np.asarray(errors, dtype=np.float64).reshape(-1)
    if e.size == 0:
        raise DegenerateInputError("repeatability of an empty error list")
    return float(np.count_nonzero(e < threshold) / e.size)


def _grouped_scatter(points, owner, index, n_groups):
    """Per-group centroid-centred scatter matrices, flattened as (k, 3, 3)."""
    counts = np.bincount(owner, minlength=n_groups)
    q = points[index]
    safe = np.maximum(counts, 1)
    cent = np.stack([np.bincount(owner, q[:, a], minlength=n_groups) for a in range(3)], axis=1) / safe[:, None]
    d = q - cent[owner]
    cov = np.empty((n_groups, 3, 3))
    for a in range(3):
        for b in range(a, 3):
            s = np.bincount(owner, d[:, a] * d[:, b], minlength=n_groups)
            cov[:, a, b] = s
            cov[:, b, a] = s
    return cov, counts


def neighborhood_axes(
    cloud: PointCloud,
    centers: ArrayLike,
    direction_radius: float,
    sign_radius: float | None = None,
) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
    """Oriented minimum-scatter axes for many centers at once.

    Returns ``(axes, valid)``. Invalid rows (fewer than three direction
    neighbors, or zero scatter) hold NaN.
    """
    c = np.asarray(centers, dtype=np.float64).reshape(-1, 3)
    k = c.shape[0]
    sign_radius = direction_radius if sign_radius is None else sign_radius
    pts = cloud.points
    owner, index = cloud.index.radius_batch(c, direction_radius)
    cov, counts = _grouped_scatter(pts, owner, index, k)
    if sign_radius == direction_radius:
        s_owner, s_index = owner, index
    else:
        s_owner, s_index = cloud.index.radius_batch(c, sign_radius)
    s_counts = np.bincount(s_owner, minlength=k)
    diff = pts[s_index] - c[s_owner]
    ssum = np.stack([np.bincount(s_owner, diff[:, a], minlength=k) for a in range(3)], axis=1)

    trace = cov[:, 0, 0] + cov[:, 1, 1] + cov[:, 2, 2]
    valid = (counts >= MIN_NEIGHBORS) & (s_counts > 0) & (trace > 0)
    axes = np.full((k, 3), np.nan)
    if valid.any():
        _, vec = min_eigvec_batch(cov[valid])
        flip = np.einsum("ij,ij->i", vec, ssum[valid]) < 0
        vec[flip] *= -1.0
        axes[valid] = vec
    return axes, valid


def _single_axis(cloud, p, direction_radius, sign_radius):
    # Shares the batched path so single and cached axes are bit-identical.
    p = np.asarray(p, dtype=np.float64).reshape(1, 3)
    axes, valid = neighborhood_axes(cloud, p, direction_radius, sign_radius)
    if not valid[0]:
        n = cloud.index.radius(p[0], direction_radius).size
        if n < MIN_NEIGHBORS:
            raise DegenerateKeypointError(
                f"{n} neighbors within {direction_radius:g}; need {MIN_NEIGHBORS}")
        raise DegenerateKeypointError("neighborhood has zero scatter")
    return axes[0]


def compute_lra(
    cloud: PointCloud,
    p: ArrayLike,
    radius: float,
    variant: LraVariant = LraVariant.SDASS_FULL_RADIUS,
    subset_fraction: float = YANG_SUBSET_FRACTION,
) -> NDArray[np.float64]:
    """Local reference axis at ``p`` with support radius ``radius``.

    The sign always comes from every neighbor within ``radius``. The
    direction comes from the same set (``SDASS_FULL_RADIUS``) or from the
    neighbors within ``subset_fraction * radius`` (``YANG_SUBSET_RADIUS``).
    """
    variant = LraVariant(variant)
    if variant is LraVariant.SDASS_FULL_RADIUS:
        return _single_axis(cloud, p, radius, radius)
    return _single_axis(cloud, p, radius * subset_fraction, radius)


def compute_lma(cloud: PointCloud, p: ArrayLike, mr: float, radius_mr: float = LMA_RADIUS_MR):
    return _single_axis(cloud, p, radius_mr * mr, radius_mr * mr)


def compute_rn_normal(cloud: PointCloud, p: ArrayLike, mr: float, radius_mr: float = RN_RADIUS_MR):
    """Radius-neighbor normal: the LMA construction on a small radius."""
    return compute_lma(cloud, p, mr, radius_mr)


class LmaField:
    """Memoized per-point LMAs of one cloud.

    Values are computed in batches on first request and never change, so
    concurrent readers see identical results regardless of request order.
    """

    def __init__(self, cloud: PointCloud, radius: float):
        if radius <= 0:
            raise ValueError("LMA radius must be positive")
        self.cloud = cloud
        self.radius = float(radius)
        n = len(cloud)
        self._axes = np.full((n, 3), np.nan)
        self._state = np.zeros(n, dtype=np.int8)  # 0 unknown, 1 valid, 2 degenerate
        self._lock = threading.Lock()

    def ensure(self, indices: ArrayLike) -> None:
        idx = np.unique(np.asarray(indices, dtype=np.intp))
        todo = idx[self._state[idx] == 0]
        if todo.size == 0:
            return
        with self._lock:
            todo = todo[self._state[todo] == 0]
            if todo.size == 0:
                return
            axes, valid = neighborhood_axes(self.cloud, self.cloud.points[todo], self.radius)
            self._axes[todo] = axes
            self._state[todo] = np.where(valid, 1, 2)

    def get(self, indices: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
        idx = np.asarray(indices, dtype=np.intp)
        self.ensure(idx)
        return self._axes[idx], self._state[idx] == 1

    @property
    def computed(self) -> int:
        return int(np.count_nonzero(self._state))
