"""Batched cyclic Jacobi eigensolver for real symmetric 3x3 matrices.

Every matrix in a batch is rotated with elementwise operations only and
stops updating once its own off-diagonal has vanished, so the result for a
given matrix does not depend on what else is in the batch.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray

_PAIRS = ((0, 1, 2), (0, 2, 1), (1, 2, 0))
_MAX_SWEEPS = 50
# Off-diagonal entries below this fraction of the Frobenius norm count as zero.
_ZERO_REL = 2.0 ** -64
# Eigenvalues within this fraction of the norm of the minimum count as tied.
TIE_REL = 1e-12


def symmetric_eigen(m: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Eigenvalues and eigenvectors of symmetric 3x3 matrices.

    Accepts ``(3, 3)`` or ``(k, 3, 3)``. Returns unsorted eigenvalues of shape
    ``(..., 3)`` and eigenvectors as columns of ``(..., 3, 3)``.
    """
    a_in = np.asarray(m, dtype=np.float64)
    single = a_in.ndim == 2
    a = a_in.reshape(-1, 3, 3)
    k = a.shape[0]
    # Work on the upper triangle; symmetrize to absorb tiny asymmetries.
    A = 0.5 * (a + a.transpose(0, 2, 1))
    A = A.copy()
    V = np.broadcast_to(np.eye(3), (k, 3, 3)).copy()
    fro = np.sqrt(np.einsum("kij,kij->k", A, A))
    thresh = _ZERO_REL * fro

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for _ in range(_MAX_SWEEPS):
            off = np.maximum.reduce([np.abs(A[:, 0, 1]), np.abs(A[:, 0, 2]), np.abs(A[:, 1, 2])])
            active = off > thresh
            if not active.any():
                break
            for p, q, r in _PAIRS:
                apq = A[:, p, q]
                rot = np.abs(apq) > thresh
                if not rot.any():
                    continue
                theta = np.where(rot, (A[:, q, q] - A[:, p, p]) / (2.0 * np.where(rot, apq, 1.0)), 0.0)
                t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
                t = np.where(np.isfinite(t), t, 0.0)
                t = np.where(rot, t, 0.0)
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                app = A[:, p, p] - t * apq
                aqq = A[:, q, q] + t * apq
                arp = c * A[:, r, p] - s * A[:, r, q]
                arq = s * A[:, r, p] + c * A[:, r, q]
                A[:, p, p] = np.where(rot, app, A[:, p, p])
                A[:, q, q] = np.where(rot, aqq, A[:, q, q])
                newpq = np.where(rot, 0.0, apq)
                A[:, p, q] = newpq
                A[:, q, p] = newpq
                A[:, r, p] = A[:, p, r] = np.where(rot, arp, A[:, r, p])
                A[:, r, q] = A[:, q, r] = np.where(rot, arq, A[:, r, q])
                vp = V[:, :, p].copy()
                vq = V[:, :, q].copy()
                cc = c[:, None]
                ss = s[:, None]
                V[:, :, p] = np.where(rot[:, None], cc * vp - ss * vq, vp)
                V[:, :, q] = np.where(rot[:, None], ss * vp + cc * vq, vq)

    vals = np.stack([A[:, 0, 0], A[:, 1, 1], A[:, 2, 2]], axis=1)
    V /= np.sqrt(np.einsum("kij,kij->kj", V, V))[:, None, :]
    if single:
        return vals[0], V[0]
    return vals, V


def min_eigvec_batch(m: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Smallest eigenvalue and its unit eigenvector for each matrix.

    Ties (within ``TIE_REL`` of the matrix norm) resolve to the candidate
    whose absolute-component tuple is lexicographically smallest.
    """
    mats = np.asarray(m, dtype=np.float64).reshape(-1, 3, 3)
    vals, vecs = symmetric_eigen(mats)
    k = mats.shape[0]
    lam = vals.min(axis=1)
    scale = np.maximum(np.abs(vals).max(axis=1), np.finfo(float).tiny)
    cand = vals <= (lam + TIE_REL * scale)[:, None]
    absv = np.abs(vecs)  # (k, component, column)
    best = np.argmax(cand, axis=1)  # first candidate column
    for j in range(3):
        challenger = cand[:, j] & (j != best)
        if not challenger.any():
            continue
        cur = absv[np.arange(k), :, best]
        new = absv[:, :, j]
        # lexicographic "new < cur" over the three components
        less = np.zeros(k, dtype=bool)
        decided = np.zeros(k, dtype=bool)
        for comp in range(3):
            lt = (new[:, comp] < cur[:, comp]) & ~decided
            gt = (new[:, comp] > cur[:, comp]) & ~decided
            less |= lt
            decided |= lt | gt
        best = np.where(challenger & less, j, best)
    vec = vecs[np.arange(k), :, best]
    return vals[np.arange(k), best], vec


def min_eigvec(m: ArrayLike) -> NDArray[np.float64]:
    """Unit eigenvector of the smallest eigenvalue of a symmetric 3x3 matrix.

    The sign is arbitrary but deterministic.
    """
    mat = np.asarray(m, dtype=np.float64)
    if mat.shape != (3, 3):
        raise ValueError("expected a 3x3 matrix")
    if not np.allclose(mat, mat.T, atol=1e-9 * max(1.0, float(np.abs(mat).max()))):
        raise ValueError("matrix is not symmetric")
    lam, vec = min_eigvec_batch(mat)
    resid = np.linalg.norm(mat @ vec[0] - lam[0] * vec[0])
    if resid > 1e-7 * max(1.0, np.linalg.norm(mat)):
        raise ArithmeticError(f"eigenvector residual {resid:.3e} too large")
    return vec[0]
