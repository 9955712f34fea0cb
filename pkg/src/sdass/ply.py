"""Minimal PLY 1.0 reader/writer (ASCII and binary little-endian).

Only ``vertex`` (x, y, z) and ``face`` (vertex index lists) elements are
understood. Extra properties on those elements are skipped with a warning.
Polygonal faces are fan-triangulated; degenerate triangles are dropped.
"""

from __future__ import annotations

import logging
import os
import warnings
from pathlib import Path

import numpy as np

from .errors import PlyHeaderError, PlyTruncatedError, PlyUnsupportedError
from .pointcloud import PointCloud, TriangleMesh

log = logging.getLogger(__name__)

_SCALARS = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


class _Property:
    def __init__(self, name, dtype, count_dtype=None):
        self.name = name
        self.dtype = dtype
        self.count_dtype = count_dtype

    @property
    def is_list(self):
        return self.count_dtype is not None


def _parse_header(f):
    magic = f.readline()
    if magic.rstrip(b"\r\n") != b"ply":
        raise PlyHeaderError("missing 'ply' magic line")
    fmt = None
    elements: list[tuple[str, int, list[_Property]]] = []
    while True:
        raw = f.readline()
        if not raw:
            raise PlyHeaderError("header ended without end_header")
        try:
            line = raw.decode("ascii").strip()
        except UnicodeDecodeError as exc:
            raise PlyHeaderError("non-ASCII header line") from exc
        if not line or line.startswith(("comment", "obj_info")):
            continue
        tok = line.split()
        if tok[0] == "end_header":
            break
        if tok[0] == "format":
            if len(tok) != 3 or tok[2] != "1.0":
                raise PlyHeaderError(f"bad format line: {line!r}")
            if tok[1] not in ("ascii", "binary_little_endian"):
                raise PlyUnsupportedError(f"unsupported PLY format {tok[1]!r}")
            fmt = tok[1]
        elif tok[0] == "element":
            if len(tok) != 3:
                raise PlyHeaderError(f"bad element line: {line!r}")
            try:
                count = int(tok[2])
            except ValueError as exc:
                raise PlyHeaderError(f"bad element count: {line!r}") from exc
            if count < 0:
                raise PlyHeaderError(f"negative element count: {line!r}")
            elements.append((tok[1], count, []))
        elif tok[0] == "property":
            if not elements:
                raise PlyHeaderError("property before any element")
            props = elements[-1][2]
            if len(tok) == 5 and tok[1] == "list":
                if tok[2] not in _SCALARS or tok[3] not in _SCALARS:
                    raise PlyUnsupportedError(f"unknown list types in {line!r}")
                props.append(_Property(tok[4], _SCALARS[tok[3]], _SCALARS[tok[2]]))
            elif len(tok) == 3:
                if tok[1] not in _SCALARS:
                    raise PlyUnsupportedError(f"unknown property type {tok[1]!r}")
                props.append(_Property(tok[2], _SCALARS[tok[1]]))
            else:
                raise PlyHeaderError(f"bad property line: {line!r}")
        else:
            raise PlyHeaderError(f"unexpected header keyword {tok[0]!r}")
    if fmt is None:
        raise PlyHeaderError("missing format line")
    for name, _, _ in elements:
        if name not in ("vertex", "face"):
            raise PlyUnsupportedError(f"unsupported element type {name!r}")
    return fmt, elements


def _check_vertex_props(props):
    names = [p.name for p in props]
    for axis in "xyz":
        if axis not in names:
            raise PlyUnsupportedError(f"vertex element lacks property {axis!r}")
    for p in props:
        if p.name in "xyz":
            if p.is_list or p.dtype not in ("f4", "f8"):
                raise PlyUnsupportedError(f"vertex {p.name} must be a 32- or 64-bit float")
        else:
            warnings.warn(f"skipping vertex property {p.name!r}", stacklevel=3)


def _face_list_prop(props):
    lists = [p for p in props if p.is_list and p.name in ("vertex_indices", "vertex_index")]
    if not lists:
        raise PlyUnsupportedError("face element lacks a vertex_indices list")
    target = lists[0]
    for p in props:
        if p is not target:
            warnings.warn(f"skipping face property {p.name!r}", stacklevel=3)
    return target


def _fan(polys):
    tris = []
    for poly in polys:
        for k in range(1, len(poly) - 1):
            tris.append((poly[0], poly[k], poly[k + 1]))
    return np.asarray(tris, dtype=np.intp).reshape(-1, 3)


def _read_ascii(f, elements):
    tokens = f.read().split()
    pos = 0
    points = np.empty((0, 3))
    polys = []

    def take(n):
        nonlocal pos
        if pos + n > len(tokens):
            raise PlyTruncatedError("ASCII payload ends early")
        out = tokens[pos:pos + n]
        pos += n
        return out

    for name, count, props in elements:
        if name == "vertex":
            _check_vertex_props(props)
            if any(p.is_list for p in props):
                raise PlyUnsupportedError("list property on vertex element")
            vals = take(count * len(props))
            try:
                arr = np.asarray(vals, dtype=np.float64).reshape(count, len(props))
            except ValueError as exc:
                raise PlyHeaderError("non-numeric vertex data") from exc
            names = [p.name for p in props]
            points = arr[:, [names.index("x"), names.index("y"), names.index("z")]]
        else:
            target = _face_list_prop(props)
            for _ in range(count):
                for p in props:
                    if p.is_list:
                        (n,) = take(1)
                        items = take(int(n))
                        if p is target:
                            polys.append([int(v) for v in items])
                    else:
                        take(1)
    return points, _fan(polys)


def _read_binary(f, elements):
    data = f.read()
    off = 0
    points = np.empty((0, 3))
    tris = np.empty((0, 3), dtype=np.intp)
    for name, count, props in elements:
        if name == "vertex":
            _check_vertex_props(props)
            if any(p.is_list for p in props):
                raise PlyUnsupportedError("list property on vertex element")
            dt = np.dtype([(p.name, "<" + p.dtype) for p in props])
            need = dt.itemsize * count
            if off + need > len(data):
                raise PlyTruncatedError("binary vertex payload ends early")
            rec = np.frombuffer(data, dtype=dt, count=count, offset=off)
            off += need
            points = np.column_stack([rec["x"], rec["y"], rec["z"]]).astype(np.float64)
        else:
            target = _face_list_prop(props)
            tris, off = _read_binary_faces(data, off, count, props, target)
    return points, tris


def _read_binary_faces(data, off, count, props, target):
    # Fast path: every face is a triangle and the list is the only property.
    if len(props) == 1:
        cdt = np.dtype("<" + target.count_dtype)
        idt = np.dtype("<" + target.dtype)
        dt = np.dtype([("n", cdt), ("v", idt, (3,))])
        need = dt.itemsize * count
        if off + need <= len(data):
            rec = np.frombuffer(data, dtype=dt, count=count, offset=off)
            if np.all(rec["n"] == 3):
                return rec["v"].astype(np.intp), off + need
    polys = []
    for _ in range(count):
        for p in props:
            if p.is_list:
                cdt = np.dtype("<" + p.count_dtype)
                if off + cdt.itemsize > len(data):
                    raise PlyTruncatedError("binary face payload ends early")
                n = int(np.frombuffer(data, dtype=cdt, count=1, offset=off)[0])
                off += cdt.itemsize
                idt = np.dtype("<" + p.dtype)
                if off + n * idt.itemsize > len(data):
                    raise PlyTruncatedError("binary face payload ends early")
                items = np.frombuffer(data, dtype=idt, count=n, offset=off)
                off += n * idt.itemsize
                if p is target:
                    polys.append(items.tolist())
            else:
                off += np.dtype(p.dtype).itemsize
                if off > len(data):
                    raise PlyTruncatedError("binary face payload ends early")
    return _fan(polys), off


def load_ply(path) -> TriangleMesh | PointCloud:
    """Read a PLY file; returns a mesh when it has faces, else a cloud."""
    with open(path, "rb") as f:
        fmt, elements = _parse_header(f)
        if "vertex" not in [e[0] for e in elements]:
            raise PlyUnsupportedError("no vertex element")
        if fmt == "ascii":
            points, tris = _read_ascii(f, elements)
        else:
            points, tris = _read_binary(f, elements)
    cloud = PointCloud(points)
    if tris.size == 0:
        return cloud
    bad = (tris[:, 0] == tris[:, 1]) | (tris[:, 1] == tris[:, 2]) | (tris[:, 0] == tris[:, 2])
    if bad.any():
        log.warning("dropping %d degenerate faces from %s", int(bad.sum()), path)
        tris = tris[~bad]
    return TriangleMesh(cloud, tris)


def save_ply(data: TriangleMesh | PointCloud, path, binary: bool = True) -> None:
    """Write positions as doubles (bit-exact round trip) and triangles as int32."""
    if isinstance(data, TriangleMesh):
        pts, tris = data.points, data.triangles
    else:
        pts, tris = data.points, np.empty((0, 3), dtype=np.intp)
    head = ["ply", f"format {'binary_little_endian' if binary else 'ascii'} 1.0",
            f"element vertex {len(pts)}",
            "property double x", "property double y", "property double z"]
    if len(tris):
        head += [f"element face {len(tris)}", "property list uchar int vertex_indices"]
    head.append("end_header")
    header = ("\n".join(head) + "\n").encode("ascii")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(f"{path}.tmp{os.getpid()}")
    with open(tmp, "wb") as f:
        f.write(header)
        if binary:
            f.write(np.ascontiguousarray(pts, dtype="<f8").tobytes())
            if len(tris):
                rec = np.empty(len(tris), dtype=[("n", "u1"), ("v", "<i4", (3,))])
                rec["n"] = 3
                rec["v"] = tris
                f.write(rec.tobytes())
        else:
            lines = [" ".join(repr(float(c)) for c in p) for p in pts]
            lines += [f"3 {a} {b} {c}" for a, b, c in tris]
            f.write(("\n".join(lines) + "\n").encode("ascii"))
    os.replace(tmp, path)
