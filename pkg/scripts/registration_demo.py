"""Feature-based registration of a noisy, moved blob back onto the original.

Writes the clouds and transforms as files so the result can be inspected
or re-run through the ``sdass`` command line.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from sdass.descriptor import describe_keypoints
from sdass.evaluation import match_features
from sdass.experiment import feature_matrix, parse_config, write_rows
from sdass.ply import save_ply
from sdass.register import ransac_register, rotation_error_deg, translation_error
from sdass.synthetic import make_synthetic_pair


@dataclass
class Config:
    n_points: int = 5000
    noise_mr: float = 0.2
    n_keypoints: int = 500
    inlier_eps_mr: float = 2.0
    seed: int = 0
    out_dir: str = "results/registration_demo"


def main(cfg: Config) -> None:
    model, scene, truth = make_synthetic_pair(cfg.n_points, cfg.noise_mr, transform_seed=cfg.seed + 1,
                                              noise_seed=cfg.seed + 2, sample_seed=cfg.seed)
    mr = model.resolution
    rng = np.random.default_rng(cfg.seed)
    skp = scene.points[rng.choice(len(scene), cfg.n_keypoints, replace=False)]
    # every model point is a candidate so that matches can land on the true partner
    sres = describe_keypoints(scene, skp, mr=mr)
    mres = describe_keypoints(model, model.points, mr=mr)
    corrs = match_features(feature_matrix(sres, 345), feature_matrix(mres, 345))
    result = ransac_register(corrs, skp, model.points, cfg.inlier_eps_mr * mr, seed=cfg.seed)
    est = result.transform.inverse()  # model -> scene, same convention as ``truth``
    rot, trans = rotation_error_deg(est, truth), translation_error(est, truth) / mr
    print(f"matches={len(corrs)} inliers={len(result.inliers)} rms={result.rms_residual / mr:.3f}mr")
    print(f"rotation error {rot:.3f} deg, translation error {trans:.3f} mr")

    out = Path(cfg.out_dir)
    save_ply(model, out / "model.ply")
    save_ply(scene, out / "scene.ply")
    save_ply(model.__class__(est.apply(model.points)), out / "model_registered.ply")
    np.savetxt(out / "truth.transform", truth.matrix())
    np.savetxt(out / "estimated.transform", est.matrix())
    write_rows(out / "summary.csv", ["matches", "inliers", "rms_mr", "rotation_error_deg", "translation_error_mr"],
               [[len(corrs), len(result.inliers), result.rms_residual / mr, rot, trans]], cfg)
    print(f"wrote {out}")


if __name__ == "__main__":
    main(parse_config(Config))
