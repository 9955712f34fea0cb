"""Acceptance gate: one test per criterion, each reporting PASS/FAIL in the summary."""

import time

import numpy as np

from acceptance_report import criterion
from oracles import brute_nearest, charpoly_min_eigvec, sampled_cell_mask
from sdass import cli
from sdass.descriptor import SdassParams, describe_keypoints, redundant_bin_mask
from sdass.eigen import min_eigvec, min_eigvec_batch
from sdass.evaluation import (CorrespondenceSet, axis_repeatability_study, label_matches, match_features, pcc,
                              rpc_curve, sample_keypoint_pairs)
from sdass.nuisance import add_gaussian_noise, random_rigid_transform
from sdass.ply import save_ply
from sdass.pointcloud import PointCloud, RigidTransform, apply_transform
from sdass.register import ransac_register, rotation_error_deg, translation_error
from sdass.synthetic import blob_points, make_synthetic_pair, plane_patch, sphere_points, torus_points

# Regression floor for criterion 10, frozen from the first verified run of
# exactly this setup (blob 5000 pts, transform seed 1, noise 0.1 mr seed 2,
# 1000 keypoint pairs seed 3, default SDASS). That run measured 93.0.
PCC_FLOOR = 93.0


def _feature_matrix(results, length):
    return np.array([r.feature.values if r.ok else np.full(length, np.nan) for r in results])


def test_c01_descriptor_length():
    with criterion(1, "descriptor length 345, 30 redundant bins, mask oracle") as info:
        t0 = time.perf_counter()
        params = SdassParams()
        keep, n_redundant = redundant_bin_mask(params.n_lh, params.n_pr, params.n_ld)
        info["length"], info["redundant"] = params.length, n_redundant
        assert params.length == 345 and int(keep.sum()) == 345
        assert n_redundant == 30
        analytic = ~keep.reshape(params.n_lh, params.n_pr, params.n_ld).any(axis=2)
        assert np.array_equal(analytic, sampled_cell_mask(params.n_lh, params.n_pr))
        cloud = blob_points(2000)
        res = describe_keypoints(cloud, cloud.points[:3], params)
        assert all(len(r.feature) == 345 for r in res)
        assert time.perf_counter() - t0 < 1.0


def test_c02_normalization():
    with criterion(2, "non-empty features sum to 1 within 1e-9 over 1000 keypoints") as info:
        t0 = time.perf_counter()
        rng = np.random.default_rng(2)
        clouds = [blob_points(3000, seed=1), torus_points(3000, seed=2), sphere_points(3000, seed=3),
                  plane_patch(3000, seed=4), PointCloud(rng.normal(size=(3000, 3)))]
        param_sets = [SdassParams(), SdassParams(10, 3, 4, 8), SdassParams(15, 6, 2, 20, lra_variant="yang")]
        worst, checked = 0.0, 0
        for i, cloud in enumerate(clouds):
            for j, params in enumerate(param_sets):
                n = 1000 // (len(clouds) * len(param_sets)) + (1 if i + j == 0 else 0)
                idx = rng.choice(len(cloud), n, replace=False)
                kps = cloud.points[idx] + rng.normal(scale=0.5 * cloud.resolution, size=(n, 3))
                for r in describe_keypoints(cloud, kps, params):
                    if r.ok:
                        worst = max(worst, abs(float(r.feature.values.sum()) - 1.0))
                        checked += 1
        info["checked"], info["max_err"] = checked, f"{worst:.1e}"
        assert checked >= 950
        assert worst <= 1e-9
        assert time.perf_counter() - t0 < 30


def test_c03_rigid_invariance():
    with criterion(3, "rigid invariance on torus, max L2 <= 1e-6") as info:
        t0 = time.perf_counter()
        torus = torus_points(5000)
        mr = torus.resolution
        moved = apply_transform(torus, random_rigid_transform(11, mr))
        idx = np.random.default_rng(3).choice(5000, 100, replace=False)
        a = _feature_matrix(describe_keypoints(torus, torus.points[idx], mr=mr), 345)
        b = _feature_matrix(describe_keypoints(moved, moved.points[idx], mr=mr), 345)
        worst = float(np.max(np.linalg.norm(a - b, axis=1)))
        info["max_l2"] = f"{worst:.1e}"
        assert worst <= 1e-6
        assert time.perf_counter() - t0 < 30


def test_c04_self_match():
    with criterion(4, "self-match AUC_pr == 1") as info:
        t0 = time.perf_counter()
        cloud = blob_points(5000)
        kps = cloud.points[np.random.default_rng(4).choice(5000, 300, replace=False)]
        f = _feature_matrix(describe_keypoints(cloud, kps), 345)
        corrs = label_matches(match_features(f, f), kps, kps, RigidTransform.identity(), 2 * cloud.resolution)
        auc = rpc_curve(corrs).auc_pr
        info["auc_pr"] = auc
        assert auc == 1.0
        assert time.perf_counter() - t0 < 10


def test_c05_lma_beats_rn():
    with criterion(5, "LMA(7mr) > RN(3mr) repeatability at 0.5 mr noise in >= 95/100 trials") as info:
        t0 = time.perf_counter()
        model = blob_points(5000)
        mr = model.resolution
        wins = 0
        for trial in range(100):
            t = random_rigid_transform(1000 + trial, mr)
            scene = add_gaussian_noise(apply_transform(model, t), 0.5, mr, 2000 + trial)
            pairs = sample_keypoint_pairs(scene, model, t.inverse(), 120, seed=trial, tolerance=2 * mr)
            lma = axis_repeatability_study(scene, model, t.inverse(), "lma", mr=mr, pairs=pairs)
            rn = axis_repeatability_study(scene, model, t.inverse(), "rn", mr=mr, pairs=pairs)
            assert lma.n_evaluated >= 100 and rn.n_evaluated >= 100
            wins += lma.repeatability > rn.repeatability
        info["wins"] = wins
        assert wins >= 95
        assert time.perf_counter() - t0 < 300


def test_c06_lra_radius_ordering():
    with criterion(6, "S2 LRA repeatability at 20 mr >= at 7 mr under 0.3 mr noise") as info:
        t0 = time.perf_counter()
        model = blob_points(5000)
        mr = model.resolution
        t = random_rigid_transform(6, mr)
        scene = add_gaussian_noise(apply_transform(model, t), 0.3, mr, 7)
        pairs = sample_keypoint_pairs(scene, model, t.inverse(), 1000, seed=8, tolerance=2 * mr)
        wide = axis_repeatability_study(scene, model, t.inverse(), "lra-sdass", radius_mr=20, mr=mr, pairs=pairs)
        narrow = axis_repeatability_study(scene, model, t.inverse(), "lra-sdass", radius_mr=7, mr=mr, pairs=pairs)
        info["r20"], info["r7"] = wide.repeatability, narrow.repeatability
        assert wide.n_evaluated >= 900
        assert wide.repeatability >= narrow.repeatability
        assert time.perf_counter() - t0 < 300


def test_c07_eigen_oracle():
    with criterion(7, "min_eigvec residual <= 1e-7 on 1e4 matrices, charpoly agreement 1e-6") as info:
        t0 = time.perf_counter()
        rng = np.random.default_rng(7)
        a = rng.normal(size=(10_000, 3, 3)) * rng.uniform(0.01, 100, size=(10_000, 1, 1))
        m = a + a.transpose(0, 2, 1)
        lam, vec = min_eigvec_batch(m)
        resid = np.linalg.norm(np.einsum("nij,nj->ni", m, vec) - lam[:, None] * vec, axis=1)
        scale = np.maximum(1.0, np.linalg.norm(m, axis=(1, 2)))
        info["max_resid"] = f"{float(np.max(resid / scale)):.1e}"
        assert np.all(resid <= 1e-7 * scale)
        for i in range(0, 10_000, 50):
            assert np.array_equal(min_eigvec(m[i]), vec[i])
        compared = 0
        for i in range(10_000):
            w = np.linalg.eigvalsh(m[i])
            if w[1] - w[0] < 1e-3 * np.linalg.norm(m[i]):
                continue  # near a tie the eigenvector is ill-conditioned
            _, ref = charpoly_min_eigvec(m[i])
            assert min(np.linalg.norm(vec[i] - ref), np.linalg.norm(vec[i] + ref)) <= 1e-6
            compared += 1
        info["compared"] = compared
        assert compared >= 9000
        assert time.perf_counter() - t0 < 10


def test_c08_matching_oracle():
    with criterion(8, "match_features equals brute force on 100 50x50 instances"):
        t0 = time.perf_counter()
        rng = np.random.default_rng(8)
        for _ in range(100):
            dim = int(rng.integers(2, 64))
            s, m = rng.random((50, dim)), rng.random((50, dim))
            c = match_features(s, m)
            ref = brute_nearest(s, m)
            assert c.scene_index.tolist() == list(range(50))
            assert c.model_index.tolist() == [r[0] for r in ref]
            assert c.distance.tolist() == [r[1] for r in ref]
            assert c.second_distance.tolist() == [r[2] for r in ref]
        assert time.perf_counter() - t0 < 10


def test_c09_registration():
    with criterion(9, "RANSAC recovers R within 1 deg, t within 1 mr, 30% outliers, >= 95/100") as info:
        t0 = time.perf_counter()
        model = blob_points(5000)
        mr = model.resolution
        ok, worst = 0, 0.0
        for trial in range(100):
            t = random_rigid_transform(3000 + trial, mr)
            scene = add_gaussian_noise(apply_transform(model, t), 0.1, mr, 4000 + trial)
            pairs = sample_keypoint_pairs(scene, model, t.inverse(), 200, seed=trial, tolerance=2 * mr)
            n = len(pairs)
            rng = np.random.default_rng(5000 + trial)
            model_index = np.arange(n)
            bad = rng.choice(n, int(round(0.3 * n)), replace=False)
            model_index[bad] = (bad + rng.integers(1, n, len(bad))) % n
            corrs = CorrespondenceSet(np.arange(n), model_index, np.zeros(n), np.ones(n))
            res = ransac_register(corrs, pairs.scene_keypoints, pairs.model_keypoints, 2 * mr, seed=trial)
            truth = t.inverse()  # scene -> model
            rot = rotation_error_deg(res.transform, truth)
            trans = translation_error(res.transform, truth)
            worst = max(worst, trans / mr)
            ok += rot <= 1.0 and trans <= mr
        info["recovered"], info["worst_t_mr"] = ok, f"{worst:.3f}"
        assert ok >= 95
        assert time.perf_counter() - t0 < 120


def test_c10_pcc_floor():
    with criterion(10, f"end-to-end PCC >= frozen floor {PCC_FLOOR}") as info:
        t0 = time.perf_counter()
        model, scene, t = make_synthetic_pair(noise_mr=0.1, transform_seed=1, noise_seed=2)
        mr = model.resolution
        pairs = sample_keypoint_pairs(scene, model, t.inverse(), 1000, seed=3)
        s = _feature_matrix(describe_keypoints(scene, pairs.scene_keypoints, mr=mr), 345)
        m = _feature_matrix(describe_keypoints(model, pairs.model_keypoints, mr=mr), 345)
        corrs = label_matches(match_features(s, m), pairs.scene_keypoints, pairs.model_keypoints,
                              t.inverse(), 2 * mr)
        result = pcc(corrs)
        info["pcc"] = result.pcc
        assert result.used == 200
        assert result.pcc >= PCC_FLOOR
        assert time.perf_counter() - t0 < 300


def test_c11_replay_determinism(tmp_path):
    with criterion(11, "manifest replay reproduces byte-identical CSVs") as info:
        model = tmp_path / "model.ply"
        save_ply(blob_points(2000, seed=5), model)
        scene, gt = tmp_path / "scene.ply", tmp_path / "gt.transform"
        runs = [
            ["perturb", str(model), "--out", str(scene), "--transform-out", str(gt), "--transform-seed", "3",
             "--noise-mr", "0.2", "--noise-seed", "4"],
            ["describe", str(model), "--out", str(tmp_path / "m.feat"), "--csv", str(tmp_path / "m.csv"),
             "--sample", "120", "--seed", "6"],
            ["describe", str(scene), "--out", str(tmp_path / "s.feat"), "--csv", str(tmp_path / "s.csv"),
             "--keypoints", str(tmp_path / "m.feat"), "--keypoint-transform", str(gt), "--mr-from", str(model)],
            ["match", str(tmp_path / "s.feat"), str(tmp_path / "m.feat"), str(gt),
             "--out-dir", str(tmp_path / "match")],
            ["axes", str(scene), str(model), str(gt), "--axis", "lma", "--n", "100",
             "--out-dir", str(tmp_path / "axes")],
            ["register", str(scene), str(model), "--gt", str(gt), "--n-keypoints", "150",
             "--out-dir", str(tmp_path / "register")],
        ]
        for argv in runs:
            assert cli.main(argv) == 0, argv
        replays = {
            tmp_path / "m.feat.manifest.txt": [tmp_path / "m.csv"],
            tmp_path / "s.feat.manifest.txt": [tmp_path / "s.csv"],
            tmp_path / "match" / "manifest.txt": [tmp_path / "match" / n for n in ("rpc.csv", "summary.csv")],
            tmp_path / "axes" / "manifest.txt": [tmp_path / "axes" / "summary.csv"],
            tmp_path / "register" / "manifest.txt": [tmp_path / "register" / "summary.csv"],
        }
        compared = 0
        for i, (manifest, csvs) in enumerate(replays.items()):
            before = {p.name: p.read_bytes() for p in csvs}
            again = tmp_path / f"replay{i}"
            assert cli.main(["--manifest", str(manifest), "--out-dir", str(again)]) == 0
            for name, data in before.items():
                assert (again / name).read_bytes() == data, name
                compared += 1
        info["csvs"] = compared
