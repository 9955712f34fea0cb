"""Binary feature container and CSV export.

Layout (little-endian)::

    magic      8 bytes  b"SDASSFT\\0"
    version    uint32
    hdr_len    uint32   length of the JSON header that follows
    header     JSON     {"descriptor", "params", "mr", "count", "length", ...}
    records    count x (3 x float64 keypoint, length x float32 values)

A keypoint whose description failed is stored with all-NaN values so that
record order stays aligned with the keypoint list.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FeatureFileError

MAGIC = b"SDASSFT\0"
VERSION = 1


@dataclass
class FeatureSet:
    descriptor: str
    params: dict
    mr: float
    keypoints: np.ndarray  # (n, 3) float64
    values: np.ndarray  # (n, L) float32; NaN rows are failures
    extra: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.keypoints)

    @property
    def length(self) -> int:
        return self.values.shape[1]

    @property
    def valid(self) -> np.ndarray:
        return np.all(np.isfinite(self.values), axis=1)


def _atomic_write(path, payload: bytes) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(f"{path}.tmp{os.getpid()}")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def save_features(fs: FeatureSet, path) -> None:
    n, length = fs.values.shape
    header = {"descriptor": fs.descriptor, "params": fs.params, "mr": float(fs.mr),
              "count": int(n), "length": int(length), **fs.extra}
    hdr = json.dumps(header, sort_keys=True).encode("utf-8")
    rec = np.empty(n, dtype=[("xyz", "<f8", (3,)), ("v", "<f4", (length,))])
    rec["xyz"] = fs.keypoints
    rec["v"] = fs.values
    _atomic_write(path, MAGIC + np.array([VERSION, len(hdr)], dtype="<u4").tobytes() + hdr + rec.tobytes())


def load_features(path) -> FeatureSet:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise FeatureFileError(f"{path}: not a feature file")
    if len(data) < 16:
        raise FeatureFileError(f"{path}: truncated header")
    version, hlen = np.frombuffer(data, dtype="<u4", count=2, offset=8)
    if version != VERSION:
        raise FeatureFileError(f"{path}: unsupported version {version}")
    try:
        header = json.loads(data[16:16 + hlen].decode("utf-8"))
        n, length = int(header.pop("count")), int(header.pop("length"))
        descriptor, params, mr = header.pop("descriptor"), header.pop("params"), float(header.pop("mr"))
    except (ValueError, KeyError) as exc:
        raise FeatureFileError(f"{path}: bad header") from exc
    dt = np.dtype([("xyz", "<f8", (3,)), ("v", "<f4", (length,))])
    off = 16 + int(hlen)
    if len(data) - off != dt.itemsize * n:
        raise FeatureFileError(f"{path}: payload size mismatch")
    rec = np.frombuffer(data, dtype=dt, count=n, offset=off)
    return FeatureSet(descriptor, params, mr, rec["xyz"].astype(np.float64),
                      rec["v"].astype(np.float32), header)


def export_csv(fs: FeatureSet, path) -> None:
    """One row per keypoint: ``x,y,z,v1..vL`` with a header row."""
    cols = ["x", "y", "z"] + [f"v{i + 1}" for i in range(fs.length)]
    lines = [",".join(cols)]
    for p, v in zip(fs.keypoints, fs.values):
        lines.append(",".join([repr(float(c)) for c in p] + [repr(float(x)) for x in v]))
    _atomic_write(path, ("\n".join(lines) + "\n").encode("ascii"))
