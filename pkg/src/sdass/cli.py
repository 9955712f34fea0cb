"""``sdass`` command-line front end.

Transform files hold a 4x4 row-major homogeneous matrix (16 numbers) that
maps model coordinates into scene coordinates, i.e. ``scene = T(model)`` as
written by ``perturb``. All radii and tolerances are in mr units.

Every run writes a manifest (``key=value`` lines) recording the command,
arguments, seeds and input hashes; ``sdass --manifest FILE`` replays it.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import SpinImageParams
from .descriptor import SdassParams, describe_keypoints
from .errors import (DegenerateInputError, FeatureFileError, ManifestError, PlyParseError,
                     RegistrationError, SdassError, UnsupportedInputError)
from .evaluation import (GEO_TOLERANCE_MR, AxisKind, axis_repeatability_study, label_matches,
                         match_features, pcc, rpc_curve)
from .features_io import FeatureSet, load_features, save_features, export_csv
from .nuisance import NuisanceSpec, perturb
from .ply import load_ply, save_ply
from .pointcloud import PointCloud, RigidTransform, TriangleMesh, detect_boundary_points, inner_region
from .register import ransac_register, rotation_error_deg, translation_error

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_GEOMETRY = 4
EXIT_REGISTRATION = 5

# (inputs, outputs) argument names per command; used for hashing and replay.
_IO = {
    "mr": (["input"], []),
    "perturb": (["input"], ["out", "transform_out"]),
    "describe": (["input", "keypoints", "keypoint_transform", "mr_from"], ["out", "csv"]),
    "match": (["scene", "model", "gt"], ["out_dir"]),
    "axes": (["scene", "model", "gt"], ["out_dir"]),
    "register": (["scene", "model", "gt"], ["out_dir"]),
}


class UsageError(SdassError):
    pass


# ---------------------------------------------------------------------------
# small I/O helpers


def _atomic_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f"{path.name}.tmp{os.getpid()}")
    tmp.write_text(text, encoding="utf-8", newline="")
    os.replace(tmp, path)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def read_transform(path) -> RigidTransform:
    try:
        vals = np.array(Path(path).read_text().split(), dtype=np.float64)
    except ValueError as exc:
        raise FeatureFileError(f"{path}: non-numeric transform") from exc
    if vals.size != 16:
        raise FeatureFileError(f"{path}: expected 16 values, found {vals.size}")
    try:
        return RigidTransform.from_matrix(vals.reshape(4, 4))
    except ValueError as exc:
        raise FeatureFileError(f"{path}: {exc}") from exc


def write_transform(t: RigidTransform, path) -> None:
    rows = [" ".join(repr(float(v)) for v in row) for row in t.matrix()]
    _atomic_text(path, "\n".join(rows) + "\n")


def _load_cloud(path) -> tuple[PointCloud, TriangleMesh | None]:
    data = load_ply(path)
    if isinstance(data, TriangleMesh):
        return data.cloud, data
    return data, None


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _read_keypoints(path) -> np.ndarray:
    path = Path(path)
    if path.read_bytes()[:8] == b"SDASSFT\0":
        return load_features(path).keypoints
    rows = []
    for line in path.read_text().splitlines():
        parts = line.replace(",", " ").split()
        if not parts:
            continue
        try:
            rows.append([float(v) for v in parts[:3]])
        except ValueError:
            if rows:
                raise FeatureFileError(f"{path}: non-numeric keypoint row {line!r}")
            continue  # header
    arr = np.asarray(rows, dtype=np.float64).reshape(-1, 3)
    if arr.size == 0:
        raise FeatureFileError(f"{path}: no keypoints")
    return arr


# ---------------------------------------------------------------------------
# shared argument groups


def _add_descriptor_args(p):
    d = SdassParams()
    g = p.add_argument_group("descriptor")
    g.add_argument("--descriptor", choices=["sdass", "spin"], default="sdass")
    g.add_argument("--support-radius-mr", type=float, default=d.support_radius_mr)
    g.add_argument("--n-lh", type=int, default=d.n_lh)
    g.add_argument("--n-pr", type=int, default=d.n_pr)
    g.add_argument("--n-ld", type=int, default=d.n_ld)
    g.add_argument("--lma-radius-mr", type=float, default=d.lma_radius_mr)
    g.add_argument("--lra-variant", choices=["sdass", "yang"], default=d.lra_variant.value)
    g.add_argument("--lra-subset-fraction", type=float, default=d.lra_subset_fraction)
    g.add_argument("--spin-bins", type=int, default=SpinImageParams().bins)


def _params(args) -> tuple[SdassParams, SpinImageParams]:
    try:
        return (SdassParams(args.support_radius_mr, args.n_lh, args.n_pr, args.n_ld,
                            args.lma_radius_mr, args.lra_variant, args.lra_subset_fraction),
                SpinImageParams(args.support_radius_mr, args.spin_bins))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _describe(cloud, keypoints, args, mr):
    params, spin = _params(args)
    results = describe_keypoints(cloud, keypoints, params, mr, args.descriptor, spin)
    length = params.length if args.descriptor == "sdass" else spin.length
    values = np.full((len(results), length), np.nan, dtype=np.float32)
    for i, r in enumerate(results):
        if r.ok:
            values[i] = r.feature.values
    meta = params.as_dict() if args.descriptor == "sdass" else spin.as_dict()
    failures = sum(not r.ok for r in results)
    return FeatureSet(args.descriptor, meta, mr, np.asarray(keypoints, dtype=np.float64).reshape(-1, 3),
                      values, {"failures": failures})


# ---------------------------------------------------------------------------
# commands


def cmd_mr(args):
    cloud, _ = _load_cloud(args.input)
    mr = cloud.resolution
    print(repr(mr))
    return {"mr": mr}


def cmd_perturb(args):
    cloud, _ = _load_cloud(args.input)
    if not 0 < args.decimate <= 1:
        raise UsageError("--decimate must lie in (0, 1]")
    if args.noise_mr < 0:
        raise UsageError("--noise-mr must be non-negative")
    spec = NuisanceSpec(args.noise_mr, Fraction(args.decimate).limit_denominator(10**6),
                        args.transform_seed, args.noise_seed, args.decimate_seed, args.translation_mr)
    scene, t = perturb(cloud, spec, cloud.resolution)
    save_ply(scene, args.out, binary=not args.ascii)
    write_transform(t, args.transform_out)
    return {"model_mr": cloud.resolution, "nuisance": spec.to_text().strip().replace("\n", ";")}


def cmd_describe(args):
    cloud, mesh = _load_cloud(args.input)
    if args.mr is not None:
        mr = args.mr
    elif args.mr_from:
        mr = _load_cloud(args.mr_from)[0].resolution
    else:
        mr = cloud.resolution
    if args.keypoints:
        kps = _read_keypoints(args.keypoints)
        if args.keypoint_transform:
            t = read_transform(args.keypoint_transform)
            kps = (t.inverse() if args.invert_transform else t).apply(kps)
        if args.snap or (args.keypoint_transform and not args.no_snap):
            _, nn = cloud.index.nearest(kps, k=1)
            kps = cloud.points[nn]
    else:
        pool = np.arange(len(cloud))
        if args.inner_only:
            if mesh is None:
                raise UnsupportedInputError("--inner-only needs a mesh input")
            pool = inner_region(cloud, detect_boundary_points(mesh), args.support_radius_mr * mr)
        if len(pool) == 0:
            raise DegenerateInputError("no candidate keypoints")
        rng = np.random.default_rng(args.seed)
        pick = pool[rng.permutation(len(pool))[:args.sample]]
        kps = cloud.points[pick]
    fs = _describe(cloud, kps, args, mr)
    save_features(fs, args.out)
    if args.csv:
        export_csv(fs, args.csv)
    return {"mr": mr, "count": len(fs), "failures": fs.extra["failures"]}


def cmd_match(args):
    scene, model = load_features(args.scene), load_features(args.model)
    if scene.length != model.length or scene.descriptor != model.descriptor:
        raise UsageError("scene and model features are not comparable")
    t = read_transform(args.gt) if args.gt else RigidTransform.identity()
    s2m = t.inverse()
    mr = model.mr
    tol = args.geo_tol * mr
    corrs = match_features(scene.values, model.values)
    corrs = label_matches(corrs, scene.keypoints, model.keypoints, s2m, tol)
    curve = rpc_curve(corrs, args.thresholds, args.sweep)
    p = pcc(corrs, args.top_k)
    out = Path(args.out_dir)
    _atomic_text(out / "rpc.csv", _csv_text(
        ["threshold", "precision", "recall"],
        zip(curve.thresholds, curve.precision, curve.recall)))
    summary = {
        "auc_pr": curve.auc_pr, "pcc": p.pcc, "pcc_used": p.used, "pcc_shortfall": p.shortfall,
        "n_matches": len(corrs), "n_correct": int(np.count_nonzero(corrs.labels)),
        "n_ground_truth": corrs.n_ground_truth,
        "excluded_scene": int(np.count_nonzero(~scene.valid)),
        "excluded_model": int(np.count_nonzero(~model.valid)),
        "geo_tolerance_mr": float(args.geo_tol), "mr": mr,
    }
    _atomic_text(out / "summary.csv", _csv_text(list(summary), [list(summary.values())]))
    print(f"AUC_pr={curve.auc_pr:.6f} PCC={p.pcc:.2f}%")
    return summary


def cmd_axes(args):
    scene, _ = _load_cloud(args.scene)
    model, _ = _load_cloud(args.model)
    s2m = read_transform(args.gt).inverse()
    res = axis_repeatability_study(scene, model, s2m, args.axis, args.radius_mr, args.n, args.seed,
                                   tolerance=args.pair_tol * model.resolution)
    summary = {
        "axis": res.kind.value, "radius_mr": res.radius_mr, "repeatability": res.repeatability,
        "mean_error_deg": float(np.degrees(res.errors.mean())) if res.n_evaluated else float("nan"),
        "n_requested": res.n_requested, "n_evaluated": res.n_evaluated, "n_excluded": res.n_excluded,
        "mr": model.resolution,
    }
    _atomic_text(Path(args.out_dir) / "summary.csv", _csv_text(list(summary), [list(summary.values())]))
    print(f"{res.kind.value} repeatability@5deg={res.repeatability:.4f}")
    return summary


def cmd_register(args):
    scene, _ = _load_cloud(args.scene)
    model, _ = _load_cloud(args.model)
    mr = model.resolution
    rng = np.random.default_rng(args.seed)
    s_kp = scene.points[rng.permutation(len(scene))[:args.n_keypoints]]
    if args.model_keypoints == "all":
        m_kp = model.points
    else:
        m_kp = model.points[rng.permutation(len(model))[:int(args.model_keypoints)]]
    fs_s = _describe(scene, s_kp, args, mr)
    fs_m = _describe(model, m_kp, args, mr)
    corrs = match_features(fs_s.values, fs_m.values)
    if args.top_k and len(corrs) > args.top_k:
        keep = np.lexsort((corrs.scene_index, corrs.distance))[:args.top_k]
        corrs = type(corrs)(corrs.scene_index[keep], corrs.model_index[keep],
                            corrs.distance[keep], corrs.second_distance[keep])
    res = ransac_register(corrs, s_kp, m_kp, args.inlier_eps_mr * mr, args.max_iters, args.ransac_seed)
    m2s = res.transform.inverse()
    out = Path(args.out_dir)
    write_transform(m2s, out / "estimated.transform")
    summary = {"n_correspondences": len(corrs), "n_inliers": len(res.inliers),
               "rms_residual": res.rms_residual, "rms_residual_mr": res.rms_residual / mr,
               "iterations": res.iterations_used, "mr": mr}
    if args.gt:
        gt = read_transform(args.gt)
        summary["rotation_error_deg"] = rotation_error_deg(gt, m2s)
        summary["translation_error_mr"] = translation_error(gt, m2s) / mr
    _atomic_text(out / "summary.csv", _csv_text(list(summary), [list(summary.values())]))
    print(" ".join(f"{k}={v}" for k, v in summary.items()))
    return summary


# ---------------------------------------------------------------------------
# parser, manifests, entry point


COMMANDS = {"mr": cmd_mr, "perturb": cmd_perturb, "describe": cmd_describe,
            "match": cmd_match, "axes": cmd_axes, "register": cmd_register}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sdass", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"sdass {__version__}")
    ap.add_argument("--manifest", help="replay the run recorded in this manifest")
    ap.add_argument("--out-dir", dest="replay_out_dir",
                    help="with --manifest: redirect outputs into this directory")
    sub = ap.add_subparsers(dest="command")

    p = sub.add_parser("mr", help="print the mesh resolution of a PLY file")
    p.add_argument("input")
    p.add_argument("--manifest-out")
    p.set_defaults(func=cmd_mr)

    p = sub.add_parser("perturb", help="apply rigid motion, decimation and noise")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--transform-out", required=True)
    p.add_argument("--noise-mr", type=float, default=0.0)
    p.add_argument("--decimate", type=float, default=1.0)
    p.add_argument("--transform-seed", type=int, default=None,
                   help="seed of the random rigid motion; omit for identity")
    p.add_argument("--noise-seed", type=int, default=0)
    p.add_argument("--decimate-seed", type=int, default=0)
    p.add_argument("--translation-mr", type=float, default=10.0)
    p.add_argument("--ascii", action="store_true")
    p.add_argument("--manifest-out")
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("describe", help="compute descriptors at keypoints")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--csv", help="also export features as CSV")
    kp = p.add_mutually_exclusive_group()
    kp.add_argument("--keypoints", help="xyz text file or feature file")
    kp.add_argument("--sample", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inner-only", action="store_true",
                   help="sample only farther than the support radius from the mesh boundary")
    p.add_argument("--keypoint-transform", help="transform applied to --keypoints")
    p.add_argument("--invert-transform", action="store_true")
    p.add_argument("--snap", action="store_true", help="snap keypoints to the nearest cloud point")
    p.add_argument("--no-snap", action="store_true")
    mr = p.add_mutually_exclusive_group()
    mr.add_argument("--mr", type=float, help="mesh resolution to use (cloud units)")
    mr.add_argument("--mr-from", help="take the mesh resolution from this PLY (usually the model)")
    _add_descriptor_args(p)
    p.add_argument("--manifest-out")
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("match", help="match features and score them against ground truth")
    p.add_argument("scene")
    p.add_argument("model")
    p.add_argument("gt", nargs="?", help="model->scene transform; identity if omitted")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--geo-tol", type=float, default=GEO_TOLERANCE_MR)
    p.add_argument("--sweep", choices=["ratio", "distance"], default="ratio")
    p.add_argument("--thresholds", type=int, default=100)
    p.add_argument("--top-k", type=int, default=200)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("axes", help="axis repeatability between a scene and a model")
    p.add_argument("scene")
    p.add_argument("model")
    p.add_argument("gt")
    p.add_argument("--axis", choices=[k.value for k in AxisKind], required=True)
    p.add_argument("--radius-mr", type=float)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pair-tol", type=float, default=GEO_TOLERANCE_MR)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_axes)

    p = sub.add_parser("register", help="feature-based RANSAC registration")
    p.add_argument("scene")
    p.add_argument("model")
    p.add_argument("--gt", help="model->scene transform, for error reporting")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--n-keypoints", type=int, default=1000)
    p.add_argument("--model-keypoints", default="1000", help="count or 'all'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--top-k", type=int, default=0, help="keep only the k best matches (0: all)")
    p.add_argument("--inlier-eps-mr", type=float, default=GEO_TOLERANCE_MR)
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--ransac-seed", type=int, default=0)
    _add_descriptor_args(p)
    p.set_defaults(func=cmd_register)
    return ap


def _manifest_path(args) -> Path | None:
    if getattr(args, "manifest_out", None):
        return Path(args.manifest_out)
    if hasattr(args, "out_dir") and args.out_dir:
        return Path(args.out_dir) / "manifest.txt"
    if getattr(args, "out", None):
        return Path(f"{args.out}.manifest.txt")
    return None


def _absolutize(args) -> None:
    ins, outs = _IO[args.command]
    for name in ins + outs + ["manifest_out"]:
        v = getattr(args, name, None)
        if v:
            setattr(args, name, os.path.abspath(v))


def _manifest_text(args, result) -> str:
    ins, outs = _IO[args.command]
    params = {k: v for k, v in sorted(vars(args).items())
              if k not in ("func", "command", "manifest", "replay_out_dir", "manifest_out")}
    lines = ["tool=sdass", f"version={__version__}", f"command={args.command}",
             f"args={json.dumps(params, sort_keys=True)}"]
    for k, v in params.items():
        lines.append(f"param.{k}={v}")
        if "seed" in k:
            lines.append(f"seed.{k}={v}")
    for name in ins:
        v = getattr(args, name, None)
        if v:
            lines.append(f"input.{name}={v} sha256={_sha256(v)}")
    for name in outs:
        v = getattr(args, name, None)
        if v:
            lines.append(f"output.{name}={v}")
    for k, v in (result or {}).items():
        lines.append(f"result.{k}={v}")
    return "\n".join(lines) + "\n"


def read_manifest(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    kv = {}
    for line in text.splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            kv[k] = v
    if kv.get("tool") != "sdass" or "command" not in kv or "args" not in kv:
        raise ManifestError(f"{path}: not an sdass manifest")
    return kv


def _replay_namespace(path, out_dir) -> argparse.Namespace:
    kv = read_manifest(path)
    command = kv["command"]
    if command not in _IO:
        raise ManifestError(f"unknown command {command!r} in manifest")
    params = json.loads(kv["args"])
    ns = argparse.Namespace(**params, command=command, manifest=None, replay_out_dir=None,
                            manifest_out=None)
    ns.func = COMMANDS[command]
    ins, outs = _IO[command]
    for key, value in kv.items():
        if key.startswith("input."):
            fpath, _, digest = value.partition(" sha256=")
            if not Path(fpath).exists():
                raise ManifestError(f"replay input {fpath} is missing")
            if _sha256(fpath) != digest:
                raise ManifestError(f"replay input {fpath} changed since the recorded run")
    if out_dir:
        for name in outs:
            v = getattr(ns, name, None)
            if not v:
                continue
            setattr(ns, name, str(Path(out_dir)) if name == "out_dir" else str(Path(out_dir) / Path(v).name))
        if command == "mr":
            ns.manifest_out = str(Path(out_dir) / "manifest.txt")
    return ns


def _error(kind: str, code: int, message: str) -> int:
    print(json.dumps({"error": kind, "code": code, "message": message}), file=sys.stderr)
    return code


def run(args) -> int:
    try:
        _absolutize(args)
        result = args.func(args)
        mpath = _manifest_path(args)
        if mpath is not None:
            _atomic_text(mpath, _manifest_text(args, result))
        return EXIT_OK
    except (PlyParseError, FeatureFileError, ManifestError) as exc:
        return _error("parse", EXIT_PARSE, str(exc))
    except RegistrationError as exc:
        return _error("registration", EXIT_REGISTRATION, str(exc))
    except UsageError as exc:
        return _error("parameter", EXIT_USAGE, str(exc))
    except (DegenerateInputError, UnsupportedInputError) as exc:
        return _error("geometry", EXIT_GEOMETRY, str(exc))
    except FileNotFoundError as exc:
        return _error("parse", EXIT_PARSE, str(exc))
    except SdassError as exc:
        return _error("internal", EXIT_INTERNAL, str(exc))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.manifest:
        try:
            ns = _replay_namespace(args.manifest, args.replay_out_dir)
        except ManifestError as exc:
            return _error("parse", EXIT_PARSE, str(exc))
        except (TypeError, ValueError) as exc:
            return _error("parse", EXIT_PARSE, f"bad manifest: {exc}")
        return run(ns)
    if args.command is None:
        parser.print_help()
        return EXIT_USAGE
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
