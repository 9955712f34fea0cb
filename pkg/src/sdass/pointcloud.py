"""Point clouds, triangle meshes, rigid transforms and spatial queries.

Coordinates stay in the units of the source data; algorithm radii are given
in mesh-resolution (mr) units by callers and converted with
:func:`estimate_mesh_resolution`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial import cKDTree

from .errors import DegenerateInputError, UnsupportedInputError

# Radius queries are widened by this factor, then filtered exactly.
_RADIUS_SLACK = 1.0 + 1e-9


def _as_points(points: ArrayLike) -> NDArray[np.float64]:
    arr = np.array(points, dtype=np.float64)
    if arr.ndim == 1 and arr.size == 3:
        arr = arr.reshape(1, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise DegenerateInputError(f"expected an (n, 3) array, got shape {arr.shape}")
    return arr


class SpatialIndex:
    """k-d tree over a fixed point array with inclusive radius queries.

    Results are filtered with an explicit squared-distance test so that they
    agree exactly with a linear scan, including points lying on the sphere.
    """

    def __init__(self, points: NDArray[np.float64]):
        self.points = points
        self._tree = cKDTree(points)

    def radius(self, center: ArrayLike, radius: float) -> NDArray[np.intp]:
        if radius <= 0:
            raise ValueError("radius must be positive")
        c = np.asarray(center, dtype=np.float64).reshape(3)
        cand = np.asarray(self._tree.query_ball_point(c, radius * _RADIUS_SLACK), dtype=np.intp)
        if cand.size == 0:
            return cand
        cand.sort()
        d = self.points[cand] - c
        d2 = d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2]
        return cand[d2 <= radius * radius]

    def radius_batch(
        self, centers: ArrayLike, radius: float
    ) -> tuple[NDArray[np.intp], NDArray[np.intp]]:
        """Flattened radius query for many centers.

        Returns ``(owner, index)`` where ``owner[k]`` is the center that
        neighbor ``index[k]`` belongs to. Neighbors of each center are sorted
        by point index.
        """
        if radius <= 0:
            raise ValueError("radius must be positive")
        c = _as_points(centers)
        lists = self._tree.query_ball_point(c, radius * _RADIUS_SLACK)
        counts = np.fromiter((len(x) for x in lists), dtype=np.intp, count=len(lists))
        if counts.sum() == 0:
            empty = np.empty(0, dtype=np.intp)
            return empty, empty
        index = np.concatenate([np.sort(np.asarray(x, dtype=np.intp)) for x in lists if x])
        owner = np.repeat(np.arange(len(lists), dtype=np.intp), counts)
        d = self.points[index] - c[owner]
        d2 = d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2]
        keep = d2 <= radius * radius
        return owner[keep], index[keep]

    def nearest(self, query: ArrayLike, k: int = 1) -> tuple[NDArray[np.float64], NDArray[np.intp]]:
        return self._tree.query(np.asarray(query, dtype=np.float64), k=k)


class PointCloud:
    """Immutable set of 3D samples.

    The mesh resolution and the spatial index are computed lazily and cached.
    """

    def __init__(self, points: ArrayLike):
        pts = _as_points(points)
        if pts.shape[0] < 1:
            raise DegenerateInputError("a point cloud needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise DegenerateInputError("point coordinates must be finite")
        pts.flags.writeable = False
        self.points = pts

    def __len__(self) -> int:
        return self.points.shape[0]

    def __repr__(self) -> str:
        return f"PointCloud(n={len(self)})"

    @cached_property
    def index(self) -> SpatialIndex:
        return SpatialIndex(self.points)

    @cached_property
    def resolution(self) -> float:
        return estimate_mesh_resolution(self)


@dataclass(frozen=True)
class TriangleMesh:
    cloud: PointCloud
    triangles: NDArray[np.intp] = field(repr=False)

    def __post_init__(self):
        tri = np.asarray(self.triangles, dtype=np.intp).reshape(-1, 3)
        n = len(self.cloud)
        if tri.size and (tri.min() < 0 or tri.max() >= n):
            raise DegenerateInputError("triangle index out of range")
        if np.any((tri[:, 0] == tri[:, 1]) | (tri[:, 1] == tri[:, 2]) | (tri[:, 0] == tri[:, 2])):
            raise DegenerateInputError("triangle with repeated vertex index")
        tri.flags.writeable = False
        object.__setattr__(self, "triangles", tri)

    @property
    def points(self) -> NDArray[np.float64]:
        return self.cloud.points


@dataclass(frozen=True)
class RigidTransform:
    """``x -> rotation @ x + translation``."""

    rotation: NDArray[np.float64]
    translation: NDArray[np.float64]

    def __post_init__(self):
        r = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.array(self.translation, dtype=np.float64).reshape(3)
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-9, rtol=0):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise ValueError("rotation determinant is not +1")
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> RigidTransform:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m: ArrayLike) -> RigidTransform:
        m = np.asarray(m, dtype=np.float64).reshape(4, 4)
        if not np.allclose(m[3], [0, 0, 0, 1]):
            raise ValueError("last row of a homogeneous transform must be [0 0 0 1]")
        return cls(m[:3, :3], m[:3, 3])

    def matrix(self) -> NDArray[np.float64]:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def inverse(self) -> RigidTransform:
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def compose(self, other: RigidTransform) -> RigidTransform:
        """``self ∘ other``: apply ``other`` first."""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)

    def apply(self, points: ArrayLike) -> NDArray[np.float64]:
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation


def estimate_mesh_resolution(cloud: PointCloud) -> float:
    """Mean distance from each point to its nearest other point."""
    if len(cloud) < 2:
        raise DegenerateInputError("mesh resolution needs at least two points")
    dist, _ = cloud.index.nearest(cloud.points, k=2)
    return float(np.mean(dist[:, 1]))


def radius_neighbors(index: SpatialIndex, center: ArrayLike, radius: float) -> NDArray[np.intp]:
    """Sorted indices of points within ``radius`` (inclusive) of ``center``."""
    return index.radius(center, radius)


def apply_transform(cloud: PointCloud, t: RigidTransform) -> PointCloud:
    return PointCloud(t.apply(cloud.points))


def _edge_counts(triangles: NDArray[np.intp]) -> tuple[NDArray[np.intp], NDArray[np.intp]]:
    e = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    e.sort(axis=1)
    return np.unique(e, axis=0, return_counts=True)


def detect_boundary_points(mesh: TriangleMesh) -> NDArray[np.intp]:
    """Vertices incident to an edge used by exactly one triangle (sorted)."""
    if not isinstance(mesh, TriangleMesh) or len(mesh.triangles) == 0:
        raise UnsupportedInputError("boundary detection needs a mesh with triangles")
    edges, counts = _edge_counts(mesh.triangles)
    return np.unique(edges[counts == 1])


def inner_region(cloud: PointCloud, boundary: ArrayLike, radius: float) -> NDArray[np.intp]:
    """Indices farther than ``radius`` from every boundary point (sorted)."""
    b = np.asarray(boundary, dtype=np.intp).reshape(-1)
    if b.size == 0:
        return np.arange(len(cloud), dtype=np.intp)
    if b.min() < 0 or b.max() >= len(cloud):
        raise ValueError("boundary index out of range")
    tree = cKDTree(cloud.points[b])
    d, _ = tree.query(cloud.points, k=1)
    inside = d > radius
    inside[b] = False
    return np.flatnonzero(inside)
