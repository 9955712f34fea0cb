"""Descriptor and axis evaluation: keypoint pairs, matching, RPC, AUC_pr, PCC."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial import cKDTree

from .axes import (LMA_RADIUS_MR, RN_RADIUS_MR, YANG_SUBSET_FRACTION, angle_error,
                   neighborhood_axes, repeatability)
from .errors import DegenerateInputError
from .pointcloud import PointCloud, RigidTransform

log = logging.getLogger(__name__)

GEO_TOLERANCE_MR = 2.0


@dataclass
class KeypointPairSet:
    scene_keypoints: NDArray[np.float64]
    model_keypoints: NDArray[np.float64]
    transform: RigidTransform  # scene -> model
    tolerance: float
    scene_indices: NDArray[np.intp]
    model_indices: NDArray[np.intp]
    requested: int
    seed: int

    def __len__(self) -> int:
        return len(self.scene_indices)

    @property
    def partial(self) -> bool:
        return len(self) < self.requested

    @property
    def residuals(self) -> NDArray[np.float64]:
        return np.linalg.norm(self.transform.apply(self.scene_keypoints) - self.model_keypoints, axis=1)


def sample_keypoint_pairs(
    scene: PointCloud,
    model: PointCloud,
    transform: RigidTransform,
    n: int = 1000,
    seed: int = 0,
    tolerance: float | None = None,
    candidates: ArrayLike | None = None,
) -> KeypointPairSet:
    """Random scene keypoints and their nearest model points under ``transform``.

    Scene points are visited in a seeded random order and kept when the
    mapped point has a model point within ``tolerance`` (default
    ``2 * model.resolution``). ``candidates`` restricts sampling to a subset
    of scene indices, e.g. an inner region.
    """
    tolerance = GEO_TOLERANCE_MR * model.resolution if tolerance is None else tolerance
    pool = np.arange(len(scene)) if candidates is None else np.asarray(candidates, dtype=np.intp)
    rng = np.random.default_rng(seed)
    order = pool[rng.permutation(len(pool))]
    mapped = transform.apply(scene.points[order])
    dist, nn = model.index.nearest(mapped, k=1)
    ok = np.flatnonzero(dist <= tolerance)[:n]
    if len(ok) < n:
        log.warning("only %d of %d keypoint pairs within tolerance %.4g", len(ok), n, tolerance)
    s_idx, m_idx = order[ok], nn[ok].astype(np.intp)
    return KeypointPairSet(scene.points[s_idx], model.points[m_idx], transform, tolerance,
                           s_idx, m_idx, n, seed)


@dataclass
class CorrespondenceSet:
    scene_index: NDArray[np.intp]
    model_index: NDArray[np.intp]
    distance: NDArray[np.float64]
    second_distance: NDArray[np.float64]
    labels: NDArray[np.bool_] | None = None
    # Scene keypoints that have a true counterpart among the model keypoints.
    n_ground_truth: int | None = None

    def __len__(self) -> int:
        return len(self.scene_index)

    @property
    def ratio(self) -> NDArray[np.float64]:
        """Nearest / second-nearest distance; 0/0 counts as fully ambiguous (1)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            r = self.distance / self.second_distance
        r = np.where(self.second_distance > 0, r, np.where(self.distance > 0, np.inf, 1.0))
        return np.minimum(r, 1.0)


def _valid_rows(features):
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2:
        raise DegenerateInputError("features must be a 2-D array")
    return f, np.flatnonzero(np.all(np.isfinite(f), axis=1))


def match_features(scene_features: ArrayLike, model_features: ArrayLike) -> CorrespondenceSet:
    """Nearest model feature (L2) for every scene feature, via a k-d tree.

    Rows containing NaN (failed descriptions) are ignored on both sides.
    Distances are recomputed directly from the matched vectors.
    """
    s, s_ok = _valid_rows(scene_features)
    m, m_ok = _valid_rows(model_features)
    if len(s_ok) == 0 or len(m_ok) == 0:
        raise DegenerateInputError("empty feature set")
    if s.shape[1] != m.shape[1]:
        raise DegenerateInputError("feature lengths differ")
    tree = cKDTree(m[m_ok])
    k = 2 if len(m_ok) > 1 else 1
    _, nn = tree.query(s[s_ok], k=k)
    nn = nn.reshape(len(s_ok), k)
    first = m_ok[nn[:, 0]]
    d1 = np.sqrt(np.sum((s[s_ok] - m[first]) ** 2, axis=1))
    if k == 2:
        d2 = np.sqrt(np.sum((s[s_ok] - m[m_ok[nn[:, 1]]]) ** 2, axis=1))
    else:
        d2 = np.full(len(s_ok), np.inf)
    return CorrespondenceSet(s_ok.astype(np.intp), first.astype(np.intp), d1, d2)


def label_matches(
    corrs: CorrespondenceSet,
    scene_keypoints: ArrayLike,
    model_keypoints: ArrayLike,
    transform: RigidTransform,
    geo_tolerance: float,
) -> CorrespondenceSet:
    """Mark ``i -> j`` correct iff ``|T(scene_i) - model_j| <= geo_tolerance``.

    Also counts how many scene keypoints have any model keypoint within the
    tolerance; that count is the recall denominator.
    """
    s = transform.apply(np.asarray(scene_keypoints, dtype=np.float64).reshape(-1, 3))
    m = np.asarray(model_keypoints, dtype=np.float64).reshape(-1, 3)
    d = np.linalg.norm(s[corrs.scene_index] - m[corrs.model_index], axis=1)
    labels = d <= geo_tolerance
    nearest, _ = cKDTree(m).query(s[corrs.scene_index], k=1)
    n_gt = int(np.count_nonzero(nearest <= geo_tolerance))
    return replace(corrs, labels=labels, n_ground_truth=n_gt)


def label_pairs(corrs: CorrespondenceSet, pairs: KeypointPairSet, geo_tolerance: float) -> CorrespondenceSet:
    return label_matches(corrs, pairs.scene_keypoints, pairs.model_keypoints, pairs.transform, geo_tolerance)


class SweepMode(enum.Enum):
    RATIO = "ratio"
    DISTANCE = "distance"


@dataclass
class RpcCurve:
    thresholds: NDArray[np.float64]
    precision: NDArray[np.float64]
    recall: NDArray[np.float64]
    accepted: NDArray[np.intp]
    auc_pr: float

    @property
    def points(self) -> NDArray[np.float64]:
        """(1 - precision, recall) pairs in threshold order."""
        return np.column_stack([1.0 - self.precision, self.recall])


def auc_pr(precision: ArrayLike, recall: ArrayLike, accepted: ArrayLike) -> float:
    """Trapezoidal area under recall-vs-precision with endpoint padding.

    Only thresholds with a non-empty accepted set contribute samples. The
    curve is extended to precision 1 with the recall of the strictest such
    threshold and to precision 0 with the recall of the loosest. Samples
    sharing a precision value collapse to their largest recall.
    """
    p = np.asarray(precision, dtype=np.float64)
    r = np.asarray(recall, dtype=np.float64)
    nonempty = np.asarray(accepted) > 0
    if not nonempty.any():
        return 0.0
    p, r = p[nonempty], r[nonempty]
    px = np.concatenate([[1.0], p, [0.0]])
    ry = np.concatenate([[r[0]], r, [r[-1]]])
    # several thresholds may share a precision value; keep the best recall there
    px, inv = np.unique(px, return_inverse=True)
    best = np.zeros(len(px))
    np.maximum.at(best, inv, ry)
    ry = best
    area = float(np.sum(np.diff(px) * (ry[1:] + ry[:-1]) / 2.0))
    return min(max(area, 0.0), 1.0)


def rpc_curve(corrs: CorrespondenceSet, n_thresholds: int = 100, mode: SweepMode | str = SweepMode.RATIO) -> RpcCurve:
    """Recall vs 1-precision over a sweep of acceptance thresholds.

    ``RATIO`` sweeps the nearest/second-nearest ratio over (0, 1];
    ``DISTANCE`` sweeps the absolute feature distance up to its maximum.
    """
    if corrs.labels is None:
        raise DegenerateInputError("correspondences are not labeled")
    if len(corrs) == 0:
        raise DegenerateInputError("no correspondences")
    mode = SweepMode(mode)
    n_gt = corrs.n_ground_truth if corrs.n_ground_truth is not None else len(corrs)
    if mode is SweepMode.RATIO:
        stat = corrs.ratio
        taus = np.arange(1, n_thresholds + 1) / n_thresholds
    else:
        stat = corrs.distance
        top = float(stat.max()) if stat.max() > 0 else 1.0
        taus = top * np.arange(1, n_thresholds + 1) / n_thresholds
    labels = corrs.labels
    acc = (stat[None, :] <= taus[:, None])
    n_acc = acc.sum(axis=1)
    n_ok = (acc & labels[None, :]).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(n_acc > 0, n_ok / np.maximum(n_acc, 1), 1.0)
        recall = np.where(n_acc > 0, n_ok / n_gt if n_gt > 0 else 0.0, 0.0)
    return RpcCurve(taus, precision, recall, n_acc, auc_pr(precision, recall, n_acc))


@dataclass
class PccResult:
    pcc: float  # percentage
    used: int
    shortfall: int


def pcc(corrs: CorrespondenceSet, top_k: int = 200) -> PccResult:
    """Percentage of correct matches among the ``top_k`` smallest distances.

    Ties are broken by scene index.
    """
    if corrs.labels is None:
        raise DegenerateInputError("correspondences are not labeled")
    order = np.lexsort((corrs.scene_index, corrs.distance))[:top_k]
    used = len(order)
    if used < top_k:
        log.warning("PCC over %d matches, fewer than top_k=%d", used, top_k)
    value = 100.0 * np.count_nonzero(corrs.labels[order]) / used if used else 0.0
    return PccResult(float(value), used, top_k - used)


class AxisKind(enum.Enum):
    LRA_SDASS = "lra-sdass"
    LRA_YANG = "lra-yang"
    LMA = "lma"
    RN = "rn"


DEFAULT_AXIS_RADIUS_MR = {AxisKind.LRA_SDASS: 20.0, AxisKind.LRA_YANG: 20.0,
                          AxisKind.LMA: LMA_RADIUS_MR, AxisKind.RN: RN_RADIUS_MR}


def axes_at(cloud: PointCloud, points: ArrayLike, kind: AxisKind | str, radius: float,
            subset_fraction: float = YANG_SUBSET_FRACTION):
    """Batched axes of ``kind`` at ``points`` with absolute ``radius``."""
    kind = AxisKind(kind)
    if kind is AxisKind.LRA_YANG:
        return neighborhood_axes(cloud, points, radius * subset_fraction, radius)
    return neighborhood_axes(cloud, points, radius, radius)


@dataclass
class RepeatabilityResult:
    kind: AxisKind
    radius_mr: float
    repeatability: float
    errors: NDArray[np.float64]  # radians, evaluated keypoints only
    n_requested: int
    n_excluded: int

    @property
    def n_evaluated(self) -> int:
        return len(self.errors)


def axis_repeatability_study(
    scene: PointCloud,
    model: PointCloud,
    transform: RigidTransform,
    kind: AxisKind | str,
    radius_mr: float | None = None,
    n: int = 1000,
    seed: int = 0,
    mr: float | None = None,
    threshold: float = np.deg2rad(5.0),
    pairs: KeypointPairSet | None = None,
    subset_fraction: float = YANG_SUBSET_FRACTION,
    tolerance: float | None = None,
) -> RepeatabilityResult:
    """Share of keypoint pairs whose axes agree within ``threshold``.

    ``transform`` maps scene to model; the scene axis is rotated into the
    model frame before comparison. ``mr`` defaults to the model's.
    Keypoints where either axis is degenerate are excluded and counted.
    """
    kind = AxisKind(kind)
    radius_mr = DEFAULT_AXIS_RADIUS_MR[kind] if radius_mr is None else radius_mr
    mr = model.resolution if mr is None else mr
    if pairs is None:
        pairs = sample_keypoint_pairs(scene, model, transform, n, seed, tolerance)
    radius = radius_mr * mr
    a_s, ok_s = axes_at(scene, pairs.scene_keypoints, kind, radius, subset_fraction)
    a_m, ok_m = axes_at(model, pairs.model_keypoints, kind, radius, subset_fraction)
    ok = ok_s & ok_m
    errors = np.atleast_1d(angle_error(a_s[ok] @ transform.rotation.T, a_m[ok]))
    rep = repeatability(errors, threshold) if errors.size else 0.0
    return RepeatabilityResult(kind, radius_mr, rep, errors, pairs.requested, int(np.count_nonzero(~ok)))
