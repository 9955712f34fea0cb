"""Seeded synthetic surfaces for tests and experiment scripts."""

from __future__ import annotations

import numpy as np

from .pointcloud import PointCloud, TriangleMesh


def grid_mesh(n: int, spacing: float = 1.0) -> TriangleMesh:
    """``n x n`` planar grid in z = 0, each square split into two triangles."""
    ij = np.stack(np.meshgrid(np.arange(n), np.arange(n), indexing="ij"), axis=-1).reshape(-1, 2)
    pts = np.column_stack([ij * spacing, np.zeros(len(ij))]).astype(np.float64)
    tris = []
    for i in range(n - 1):
        for j in range(n - 1):
            a, b, c, d = i * n + j, (i + 1) * n + j, (i + 1) * n + j + 1, i * n + j + 1
            tris += [(a, b, c), (a, c, d)]
    return TriangleMesh(PointCloud(pts), np.asarray(tris, dtype=np.intp).reshape(-1, 3))


def plane_patch(n_points: int, half_size: float = 1.0, seed: int = 0) -> PointCloud:
    rng = np.random.default_rng(seed)
    xy = rng.uniform(-half_size, half_size, size=(n_points, 2))
    return PointCloud(np.column_stack([xy, np.zeros(n_points)]))


def sphere_points(n_points: int, radius: float = 1.0, seed: int = 0) -> PointCloud:
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(n_points, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return PointCloud(radius * v)


def torus_points(n_points: int, major: float = 2.0, minor: float = 1.0, seed: int = 0) -> PointCloud:
    """Area-uniform samples on a torus (rejection on the tube angle)."""
    rng = np.random.default_rng(seed)
    out = []
    while sum(len(o) for o in out) < n_points:
        u = rng.uniform(0, 2 * np.pi, n_points)
        v = rng.uniform(0, 2 * np.pi, n_points)
        w = rng.uniform(0, 1, n_points)
        keep = w <= (major + minor * np.cos(v)) / (major + minor)
        u, v = u[keep], v[keep]
        out.append(np.column_stack([(major + minor * np.cos(v)) * np.cos(u),
                                    (major + minor * np.cos(v)) * np.sin(u),
                                    minor * np.sin(v)]))
    return PointCloud(np.concatenate(out)[:n_points])


def blob_points(n_points: int, n_bumps: int = 14, amplitude: float = 0.18,
                shape_seed: int = 7, seed: int = 0) -> PointCloud:
    """Closed, asymmetric surface: a unit sphere with smooth radial bumps.

    ``shape_seed`` fixes the bump layout, ``seed`` the sampling. Unlike a
    torus or sphere it has no continuous symmetry, so local shapes differ
    from place to place.
    """
    shape_rng = np.random.default_rng(shape_seed)
    centers = shape_rng.normal(size=(n_bumps, 3))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    heights = amplitude * shape_rng.uniform(-1.0, 1.0, n_bumps)
    widths = shape_rng.uniform(0.25, 0.55, n_bumps)
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(n_points, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    g2 = np.sum((d[:, None, :] - centers[None]) ** 2, axis=2)
    r = 1.0 + np.sum(heights * np.exp(-g2 / (2 * widths ** 2)), axis=1)
    return PointCloud(d * r[:, None])


def make_synthetic_pair(n_points: int = 5000, noise_mr: float = 0.1, transform_seed: int = 1,
                        noise_seed: int = 2, sample_seed: int = 0):
    """Model blob plus a rigidly moved, noisy scene copy.

    Returns ``(model, scene, transform)`` with ``scene ≈ transform(model)``.
    Noise is measured in the model's mr.
    """
    from .nuisance import NuisanceSpec, perturb

    model = blob_points(n_points, seed=sample_seed)
    spec = NuisanceSpec(noise_sigma_mr=noise_mr, transform_seed=transform_seed, noise_seed=noise_seed)
    scene, transform = perturb(model, spec, model.resolution)
    return model, scene, transform
