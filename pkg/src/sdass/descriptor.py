"""SDASS feature: deviation-angle histograms over a height x radius grid.

The support sphere around a keypoint is aligned with its LRA, cut into
``n_lh`` height slabs over [-R, R] and ``n_pr`` radial annuli over [0, R],
and every cell histograms the angle between the keypoint LRA and the LMA of
each point falling in it. Cells of the circumscribing cylinder that lie
entirely outside the sphere are dropped.

Flattening order is cell-major, angle-minor, with cells ordered by height
index then radial index: ``((i_lh - 1) * n_pr + (i_pr - 1)) * n_ld + (i_ld - 1)``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .axes import LMA_RADIUS_MR, YANG_SUBSET_FRACTION, LmaField, LraVariant, compute_lra
from .errors import EmptyFeatureError, SdassError
from .pointcloud import PointCloud

THREADS_ENV = "SDASS_THREADS"


@dataclass(frozen=True)
class SdassParams:
    support_radius_mr: float = 20.0
    n_lh: int = 5
    n_pr: int = 5
    n_ld: int = 15
    lma_radius_mr: float = LMA_RADIUS_MR
    lra_variant: LraVariant = LraVariant.SDASS_FULL_RADIUS
    lra_subset_fraction: float = YANG_SUBSET_FRACTION

    def __post_init__(self):
        object.__setattr__(self, "lra_variant", LraVariant(self.lra_variant))
        for name in ("n_lh", "n_pr", "n_ld"):
            if int(getattr(self, name)) != getattr(self, name) or getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.support_radius_mr <= 0 or self.lma_radius_mr <= 0:
            raise ValueError("radii must be positive")
        if not 0 < self.lra_subset_fraction <= 1:
            raise ValueError("lra_subset_fraction must lie in (0, 1]")

    @property
    def length(self) -> int:
        return int(np.count_nonzero(redundant_bin_mask(self.n_lh, self.n_pr, self.n_ld)[0]))

    def as_dict(self) -> dict:
        return {
            "support_radius_mr": self.support_radius_mr,
            "n_lh": self.n_lh,
            "n_pr": self.n_pr,
            "n_ld": self.n_ld,
            "lma_radius_mr": self.lma_radius_mr,
            "lra_variant": self.lra_variant.value,
            "lra_subset_fraction": self.lra_subset_fraction,
        }


@dataclass
class FeatureVector:
    values: NDArray[np.float64]
    n_points: int = 0
    n_skipped: int = 0
    lra: NDArray[np.float64] | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return self.values.shape[0]


def local_frame(lra: ArrayLike) -> NDArray[np.float64]:
    """Rotation whose rows form a right-handed basis with ``lra`` last."""
    z = np.asarray(lra, dtype=np.float64).reshape(3)
    # Seed with the world axis least aligned with z.
    seed = np.zeros(3)
    seed[int(np.argmin(np.abs(z)))] = 1.0
    x = seed - (seed @ z) * z
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return np.stack([x, y, z])


def transform_to_local(points: ArrayLike, p: ArrayLike, lra: ArrayLike) -> NDArray[np.float64]:
    """Translate ``p`` to the origin and rotate ``lra`` onto +z."""
    q = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    rot = local_frame(lra)
    return (q - np.asarray(p, dtype=np.float64).reshape(3)) @ rot.T


def bin_indices(local: ArrayLike, radius: float, n_lh: int, n_pr: int) -> tuple[NDArray[np.intp], NDArray[np.intp]]:
    """1-based (height, radial) cell indices; index 0 is clamped to 1."""
    q = np.asarray(local, dtype=np.float64).reshape(-1, 3)
    i_lh = np.ceil((radius + q[:, 2]) * n_lh / (2.0 * radius))
    i_pr = np.ceil(np.hypot(q[:, 0], q[:, 1]) * n_pr / radius)
    return (np.clip(i_lh, 1, n_lh).astype(np.intp), np.clip(i_pr, 1, n_pr).astype(np.intp))


def deviation_angle(lra: ArrayLike, lma: ArrayLike) -> float | NDArray[np.float64]:
    dot = np.clip(np.asarray(lma, dtype=np.float64) @ np.asarray(lra, dtype=np.float64), -1.0, 1.0)
    out = np.arccos(dot)
    return float(out) if np.ndim(out) == 0 else out


def angle_bin(angles: ArrayLike, n_ld: int) -> NDArray[np.intp]:
    """1-based uniform bins over [0, pi]; pi falls in the last bin."""
    b = np.ceil(np.asarray(angles, dtype=np.float64) * n_ld / math.pi)
    return np.clip(b, 1, n_ld).astype(np.intp)


@lru_cache(maxsize=64)
def _mask(n_lh: int, n_pr: int, n_ld: int) -> tuple[NDArray[np.bool_], int]:
    # Unit radius: redundancy is scale-free.
    h = np.linspace(-1.0, 1.0, n_lh + 1)
    lo, hi = h[:-1], h[1:]
    min_h = np.where((lo <= 0) & (hi >= 0), 0.0, np.minimum(np.abs(lo), np.abs(hi)))
    min_r = np.arange(n_pr) / n_pr
    d2 = min_h[:, None] ** 2 + min_r[None, :] ** 2
    # A cell is redundant when even its closest corner is on or outside the sphere.
    cell_redundant = d2 >= 1.0 - 1e-12
    keep = np.repeat(~cell_redundant.reshape(-1), n_ld)
    keep.flags.writeable = False
    return keep, int(np.count_nonzero(~keep))


def redundant_bin_mask(n_lh: int, n_pr: int, n_ld: int, radius: float = 1.0) -> tuple[NDArray[np.bool_], int]:
    """``(keep, n_redundant)`` over the flattened ``n_lh*n_pr*n_ld`` histogram.

    ``keep`` is False for the angle bins of cells lying wholly outside the
    support sphere. The result does not depend on ``radius``.
    """
    return _mask(int(n_lh), int(n_pr), int(n_ld))


def _histogram(local, lma, lra, radius, params):
    i_lh, i_pr = bin_indices(local, radius, params.n_lh, params.n_pr)
    i_ld = angle_bin(deviation_angle(lra, lma), params.n_ld)
    flat = ((i_lh - 1) * params.n_pr + (i_pr - 1)) * params.n_ld + (i_ld - 1)
    return np.bincount(flat, minlength=params.n_lh * params.n_pr * params.n_ld).astype(np.float64)


def compute_sdass(
    cloud: PointCloud,
    keypoint: ArrayLike,
    params: SdassParams,
    mr: float,
    lma: LmaField | None = None,
    lra: ArrayLike | None = None,
) -> FeatureVector:
    """SDASS feature of ``keypoint`` (any 3D position) on ``cloud``.

    ``mr`` converts the mr-unit radii to cloud units. A shared ``lma`` field
    avoids recomputing neighbor LMAs across keypoints; an explicit ``lra``
    skips the axis estimate.
    """
    p = np.asarray(keypoint, dtype=np.float64).reshape(3)
    radius = params.support_radius_mr * mr
    if lma is None:
        lma = LmaField(cloud, params.lma_radius_mr * mr)
    elif not math.isclose(lma.radius, params.lma_radius_mr * mr, rel_tol=1e-12):
        raise ValueError("LMA field radius does not match params")
    if lra is None:
        lra = compute_lra(cloud, p, radius, params.lra_variant, params.lra_subset_fraction)
    lra = np.asarray(lra, dtype=np.float64)

    idx = cloud.index.radius(p, radius)
    axes, valid = lma.get(idx)
    n_skipped = int(np.count_nonzero(~valid))
    idx, axes = idx[valid], axes[valid]
    if idx.size == 0:
        raise EmptyFeatureError("no support point with a valid LMA")

    local = transform_to_local(cloud.points[idx], p, lra)
    hist = _histogram(local, axes, lra, radius, params)
    keep, _ = redundant_bin_mask(params.n_lh, params.n_pr, params.n_ld)
    values = hist[keep]
    return FeatureVector(values / values.sum(), n_points=int(idx.size), n_skipped=n_skipped, lra=lra)


@dataclass
class DescribeResult:
    keypoint: NDArray[np.float64]
    feature: FeatureVector | None
    reason: str | None = None

    @property
    def ok(self) -> bool:
        return self.feature is not None


def default_workers() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return 1


def describe_keypoints(
    cloud: PointCloud,
    keypoints: ArrayLike,
    params: SdassParams | None = None,
    mr: float | None = None,
    descriptor: str = "sdass",
    spin_params=None,
    workers: int | None = None,
) -> list[DescribeResult]:
    """Describe many keypoints; failures are recorded per keypoint.

    Results are in input order and each one equals an isolated
    :func:`compute_sdass` (or spin-image) call on the same keypoint.
    """
    from .baselines import SpinImageParams, compute_spin_image

    params = params or SdassParams()
    mr = cloud.resolution if mr is None else mr
    kps = np.asarray(keypoints, dtype=np.float64).reshape(-1, 3)
    workers = default_workers() if workers is None else max(1, workers)
    lma = LmaField(cloud, params.lma_radius_mr * mr) if descriptor == "sdass" else None
    if descriptor == "spin":
        spin_params = spin_params or SpinImageParams(support_radius_mr=params.support_radius_mr)
    elif descriptor != "sdass":
        raise ValueError(f"unknown descriptor {descriptor!r}")

    if lma is not None and len(kps):
        # Warm the cache for every support point up front so workers only read.
        owner, index = cloud.index.radius_batch(kps, params.support_radius_mr * mr)
        lma.ensure(index)

    def one(p):
        try:
            if descriptor == "sdass":
                return DescribeResult(p, compute_sdass(cloud, p, params, mr, lma=lma))
            lra = compute_lra(cloud, p, spin_params.support_radius_mr * mr,
                              params.lra_variant, params.lra_subset_fraction)
            return DescribeResult(p, compute_spin_image(cloud, p, lra, spin_params, mr))
        except SdassError as exc:
            return DescribeResult(p, None, f"{type(exc).__name__}: {exc}")

    if workers == 1 or len(kps) < 2:
        return [one(p) for p in kps]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, kps))
