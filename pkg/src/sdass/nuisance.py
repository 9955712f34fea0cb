"""Seeded nuisances: Gaussian noise, random decimation, random rigid motion."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .errors import DegenerateOutputError
from .pointcloud import PointCloud, RigidTransform


@dataclass(frozen=True)
class NuisanceSpec:
    noise_sigma_mr: float = 0.0
    decimation_rate: Fraction = Fraction(1)
    transform_seed: int | None = None
    noise_seed: int = 0
    decimation_seed: int = 0
    translation_range_mr: float = 10.0
    # Noise is added after the rigid motion.
    order: str = "transform,decimate,noise"

    def __post_init__(self):
        object.__setattr__(self, "decimation_rate", Fraction(self.decimation_rate).limit_denominator(10**6))
        if self.noise_sigma_mr < 0:
            raise ValueError("noise sigma must be non-negative")
        if not 0 < self.decimation_rate <= 1:
            raise ValueError("decimation rate must lie in (0, 1]")

    def to_text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in asdict(self).items())

    @classmethod
    def from_text(cls, text: str) -> NuisanceSpec:
        kv = dict(line.split("=", 1) for line in text.splitlines() if "=" in line)
        seed = kv.get("transform_seed", "None")
        return cls(
            noise_sigma_mr=float(kv.get("noise_sigma_mr", 0.0)),
            decimation_rate=Fraction(kv.get("decimation_rate", "1")),
            transform_seed=None if seed == "None" else int(seed),
            noise_seed=int(kv.get("noise_seed", 0)),
            decimation_seed=int(kv.get("decimation_seed", 0)),
            translation_range_mr=float(kv.get("translation_range_mr", 10.0)),
            order=kv.get("order", "transform,decimate,noise"),
        )


def add_gaussian_noise(cloud: PointCloud, sigma_mr: float, mr: float, seed: int) -> PointCloud:
    """Independent N(0, (sigma_mr*mr)^2) perturbation of every coordinate."""
    if sigma_mr < 0:
        raise ValueError("sigma must be non-negative")
    if sigma_mr == 0:
        return PointCloud(cloud.points)
    rng = np.random.default_rng(seed)
    return PointCloud(cloud.points + rng.normal(0.0, sigma_mr * mr, size=cloud.points.shape))


def decimate(cloud: PointCloud, rate: float, seed: int) -> PointCloud:
    """Keep a uniformly random floor(rate*n) subset, in original order."""
    if not 0 < rate <= 1:
        raise ValueError("decimation rate must lie in (0, 1]")
    n = len(cloud)
    keep = math.floor(Fraction(rate).limit_denominator(10**6) * n)
    if keep == 0:
        raise DegenerateOutputError("decimation leaves no points")
    if keep == n:
        return PointCloud(cloud.points)
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(n, size=keep, replace=False))
    return PointCloud(cloud.points[idx])


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform rotation on SO(3) from a uniform unit quaternion (Shoemake)."""
    u1, u2, u3 = rng.random(3)
    a, b = math.sqrt(1 - u1), math.sqrt(u1)
    w, x, y, z = (a * math.sin(2 * math.pi * u2), a * math.cos(2 * math.pi * u2),
                  b * math.sin(2 * math.pi * u3), b * math.cos(2 * math.pi * u3))
    r = np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])
    # Re-orthonormalize so the RigidTransform 1e-9 checks always hold.
    u, _, vt = np.linalg.svd(r)
    return u @ vt


def random_rigid_transform(seed: int, mr: float = 1.0, translation_range_mr: float = 10.0) -> RigidTransform:
    """Uniform random rotation; translation uniform in a cube of half-width ``translation_range_mr * mr``."""
    rng = np.random.default_rng(seed)
    rot = random_rotation(rng)
    half = translation_range_mr * mr
    t = rng.uniform(-half, half, size=3)
    return RigidTransform(rot, t)


def perturb(cloud: PointCloud, spec: NuisanceSpec, mr: float | None = None):
    """Apply ``spec`` in the order transform, decimate, noise.

    Returns ``(scene, transform)`` where ``scene ≈ transform(cloud)``.
    """
    mr = cloud.resolution if mr is None else mr
    if spec.transform_seed is None:
        t = RigidTransform.identity()
    else:
        t = random_rigid_transform(spec.transform_seed, mr, spec.translation_range_mr)
    out = PointCloud(t.apply(cloud.points)) if spec.transform_seed is not None else cloud
    out = decimate(out, spec.decimation_rate, spec.decimation_seed)
    out = add_gaussian_noise(out, spec.noise_sigma_mr, mr, spec.noise_seed)
    return out, t
