"""Rigid registration from feature correspondences (Kabsch + RANSAC)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DegenerateInputError, RegistrationError
from .evaluation import CorrespondenceSet
from .pointcloud import RigidTransform

_RANK_TOL = 1e-9


def _kabsch_batch(src: NDArray[np.float64], dst: NDArray[np.float64]):
    """Least-squares rotations/translations mapping src[k] onto dst[k]."""
    cs = src.mean(axis=1, keepdims=True)
    cd = dst.mean(axis=1, keepdims=True)
    h = np.einsum("kni,knj->kij", src - cs, dst - cd)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.transpose(0, 2, 1) @ u.transpose(0, 2, 1)))
    d = np.where(d == 0, 1.0, d)
    fix = np.broadcast_to(np.eye(3), h.shape).copy()
    fix[:, 2, 2] = d
    rot = vt.transpose(0, 2, 1) @ fix @ u.transpose(0, 2, 1)
    t = cd[:, 0] - np.einsum("kij,kj->ki", rot, cs[:, 0])
    return rot, t


def _spread_ok(src: NDArray[np.float64]) -> NDArray[np.bool_]:
    """True where the point sets are not collinear (second singular value > 0)."""
    c = src - src.mean(axis=1, keepdims=True)
    s = np.linalg.svd(c, compute_uv=False)
    return s[:, 1] > _RANK_TOL * np.maximum(s[:, 0], np.finfo(float).tiny)


def estimate_rigid(scene_points: ArrayLike, model_points: ArrayLike) -> RigidTransform:
    """Rotation and translation minimizing ``sum |R s_i + t - m_i|^2`` (no reflections)."""
    s = np.asarray(scene_points, dtype=np.float64).reshape(-1, 3)
    m = np.asarray(model_points, dtype=np.float64).reshape(-1, 3)
    if len(s) != len(m):
        raise DegenerateInputError("point sets must be index-aligned")
    if len(s) < 3:
        raise DegenerateInputError("rigid estimation needs at least three pairs")
    if not _spread_ok(s[None])[0] or not _spread_ok(m[None])[0]:
        raise DegenerateInputError("collinear or coincident points")
    rot, t = _kabsch_batch(s[None], m[None])
    return RigidTransform(rot[0], t[0])


@dataclass
class RegistrationResult:
    transform: RigidTransform  # scene -> model
    inliers: NDArray[np.intp]  # indices into the correspondence set
    rms_residual: float
    iterations_used: int
    hypothesis_rms: float


def _residuals(rot, t, s, m):
    return np.linalg.norm(s @ rot.T + t - m, axis=1)


def ransac_register(
    corrs: CorrespondenceSet,
    scene_keypoints: ArrayLike,
    model_keypoints: ArrayLike,
    inlier_eps: float,
    max_iters: int = 5000,
    seed: int = 0,
    confidence: float = 0.999,
    batch: int = 256,
) -> RegistrationResult:
    """Three-point hypothesize-and-verify, then refit on the winning inliers.

    The winner is the hypothesis with most inliers, then the lower inlier
    RMS, then the lower hypothesis index. Sampling stops early once the
    standard confidence bound for the current best inlier ratio is met.
    """
    s_all = np.asarray(scene_keypoints, dtype=np.float64).reshape(-1, 3)
    m_all = np.asarray(model_keypoints, dtype=np.float64).reshape(-1, 3)
    s = s_all[corrs.scene_index]
    m = m_all[corrs.model_index]
    n = len(s)
    if n < 3:
        raise DegenerateInputError("RANSAC needs at least three correspondences")
    rng = np.random.default_rng(seed)

    best = (-1, math.inf, -1)  # (count, rms, hypothesis index)
    best_model = None
    needed = max_iters
    done = 0
    while done < min(needed, max_iters):
        k = min(batch, max_iters - done)
        # Three distinct indices per hypothesis.
        trip = np.stack([rng.choice(n, size=3, replace=False) for _ in range(k)])
        ss, mm = s[trip], m[trip]
        good = _spread_ok(ss) & _spread_ok(mm)
        if good.any():
            rot, t = _kabsch_batch(ss[good], mm[good])
            res = np.linalg.norm(np.einsum("kij,nj->kni", rot, s) + t[:, None, :] - m[None], axis=2)
            inl = res <= inlier_eps
            counts = inl.sum(axis=1)
            with np.errstate(invalid="ignore"):
                rms = np.sqrt(np.where(counts > 0, (np.where(inl, res, 0.0) ** 2).sum(axis=1) / np.maximum(counts, 1), np.inf))
            hyp_ids = done + np.flatnonzero(good)
            for j in np.lexsort((hyp_ids, rms, -counts))[:1]:
                cand = (int(counts[j]), float(rms[j]), int(hyp_ids[j]))
                if (cand[0], -cand[1], -cand[2]) > (best[0], -best[1], -best[2]):
                    best = cand
                    best_model = (rot[j], t[j], np.flatnonzero(inl[j]))
        done += k
        if best[0] >= 3:
            w = best[0] / n
            if w >= 1.0:
                needed = done
            else:
                needed = min(max_iters, math.ceil(math.log(1 - confidence) / math.log(1 - w ** 3)))
    if best_model is None or best[0] < 3:
        raise RegistrationError("no hypothesis reached three inliers")
    _, _, inliers = best_model
    try:
        refit = estimate_rigid(s[inliers], m[inliers])
    except DegenerateInputError as exc:
        raise RegistrationError(f"inlier set is degenerate: {exc}") from exc
    rms = float(np.sqrt(np.mean(_residuals(refit.rotation, refit.translation, s[inliers], m[inliers]) ** 2)))
    return RegistrationResult(refit, inliers.astype(np.intp), rms, done, best[1])


def rotation_error_deg(a: RigidTransform, b: RigidTransform) -> float:
    """Geodesic angle between two rotations, in degrees."""
    c = (np.trace(a.rotation.T @ b.rotation) - 1.0) / 2.0
    return float(np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))


def translation_error(a: RigidTransform, b: RigidTransform) -> float:
    return float(np.linalg.norm(a.translation - b.translation))
