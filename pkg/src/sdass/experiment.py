"""Helpers shared by the experiment scripts: dataclass configs from argv, CSV output."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
from pathlib import Path
from typing import TypeVar

import numpy as np

from .descriptor import describe_keypoints
from .evaluation import label_pairs, match_features, pcc, rpc_curve, sample_keypoint_pairs

C = TypeVar("C")


def _parse_tuple(kind):
    def parse(text: str):
        return tuple(kind(v) for v in text.split(",") if v)
    return parse


def parse_config(cls: type[C], argv=None, description: str | None = None) -> C:
    """Build ``cls`` from its defaults overridden by ``--field value`` flags.

    Tuple fields take comma-separated values.
    """
    ap = argparse.ArgumentParser(description=description or cls.__doc__)
    for f in dataclasses.fields(cls):
        default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
        flag = "--" + f.name.replace("_", "-")
        if isinstance(default, bool):
            ap.add_argument(flag, type=lambda s: s.lower() in ("1", "true", "yes"), default=default)
        elif isinstance(default, tuple):
            kind = type(default[0]) if default else float
            ap.add_argument(flag, type=_parse_tuple(kind), default=default)
        else:
            ap.add_argument(flag, type=type(default), default=default)
    return cls(**vars(ap.parse_args(argv)))


def write_rows(path, header, rows, config=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    if config is not None:
        path.with_suffix(".config.json").write_text(json.dumps(dataclasses.asdict(config), indent=2) + "\n")
    return path


def feature_matrix(results, length: int) -> np.ndarray:
    """Stack describe results; failed keypoints become NaN rows."""
    return np.array([r.feature.values if r.ok else np.full(length, np.nan) for r in results]).reshape(-1, length)


def match_scores(scene, model, scene_to_model, n_keypoints, seed, mr, geo_tol_mr=2.0, **describe_kw):
    """Describe paired keypoints on both clouds, match scene to model, return (auc_pr, pcc)."""
    pairs = sample_keypoint_pairs(scene, model, scene_to_model, n_keypoints, seed=seed)
    rs = describe_keypoints(scene, pairs.scene_keypoints, mr=mr, **describe_kw)
    rm = describe_keypoints(model, pairs.model_keypoints, mr=mr, **describe_kw)
    length = next(len(r.feature) for r in rs if r.ok)
    corrs = match_features(feature_matrix(rs, length), feature_matrix(rm, length))
    corrs = label_pairs(corrs, pairs, geo_tol_mr * mr)
    return rpc_curve(corrs).auc_pr, pcc(corrs).pcc
