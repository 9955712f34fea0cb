import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import naive_sdass, sampled_cell_mask
from sdass.axes import LmaField, compute_lra
from sdass.descriptor import (SdassParams, _histogram, angle_bin, bin_indices, compute_sdass,
                              describe_keypoints, deviation_angle, local_frame, redundant_bin_mask,
                              transform_to_local)
from sdass.errors import DegenerateKeypointError, EmptyFeatureError
from sdass.nuisance import random_rigid_transform
from sdass.pointcloud import PointCloud, apply_transform


def bumpy_patch(n=500, seed=0):
    rng = np.random.default_rng(seed)
    xy = rng.uniform(-1, 1, size=(n, 2))
    z = 0.3 * np.sin(2 * xy[:, 0]) * np.cos(3 * xy[:, 1]) + 0.1 * xy[:, 0] ** 2
    return PointCloud(np.column_stack([xy, z]))


def test_params_defaults_and_length():
    p = SdassParams()
    assert (p.support_radius_mr, p.n_lh, p.n_pr, p.n_ld, p.lma_radius_mr) == (20.0, 5, 5, 15, 7.0)
    assert p.length == 345


@pytest.mark.parametrize("kw", [{"n_lh": 0}, {"n_ld": -1}, {"support_radius_mr": 0}, {"lma_radius_mr": -1}])
def test_params_validation(kw):
    with pytest.raises(ValueError):
        SdassParams(**kw)


def test_local_frame_is_rotation():
    rng = np.random.default_rng(0)
    for _ in range(50):
        z = rng.normal(size=3)
        z /= np.linalg.norm(z)
        r = local_frame(z)
        np.testing.assert_allclose(r @ r.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(r) == pytest.approx(1.0)
        np.testing.assert_allclose(r @ z, [0, 0, 1], atol=1e-12)


def test_transform_identity_axis():
    q = np.array([[1.0, 2, 3], [-1, 0.5, -2]])
    out = transform_to_local(q, [0, 0, 0], [0, 0, 1])
    np.testing.assert_array_equal(out[:, 2], q[:, 2])
    np.testing.assert_allclose(np.hypot(out[:, 0], out[:, 1]), np.hypot(q[:, 0], q[:, 1]), atol=1e-15)


def test_transform_keypoint_to_origin():
    p = np.array([0.3, -1.0, 2.0])
    np.testing.assert_array_equal(transform_to_local([p], p, [0.6, 0.0, 0.8]), [[0, 0, 0]])


def test_transform_matches_dot_and_rejection(rng):
    q = rng.normal(size=(100, 3))
    p = rng.normal(size=3)
    lra = rng.normal(size=3)
    lra /= np.linalg.norm(lra)
    out = transform_to_local(q, p, lra)
    for qi, oi in zip(q, out):
        h = (qi - p) @ lra
        r = np.linalg.norm((qi - p) - h * lra)
        assert oi[2] == pytest.approx(h, abs=1e-9)
        assert math.hypot(oi[0], oi[1]) == pytest.approx(r, abs=1e-9)
        assert np.linalg.norm(oi) == pytest.approx(np.linalg.norm(qi - p), abs=1e-9)


@pytest.mark.parametrize("q, expected", [
    ((0.0, 0.0, 0.0), (3, 1)),
    ((0.0, 0.0, -20.0), (1, 1)),
    ((20.0, 0.0, 20.0), (5, 5)),
    ((0.0, 4.0, -12.0), (1, 1)),
    ((0.0, 4.0001, -11.9999), (2, 2)),
])
def test_bin_indices(q, expected):
    i_lh, i_pr = bin_indices([q], 20.0, 5, 5)
    assert (int(i_lh[0]), int(i_pr[0])) == expected


def test_deviation_angle_cases():
    assert deviation_angle([0, 0, 1], [0, 0, 1]) == 0.0
    assert deviation_angle([0, 0, 1], [0, 0, -1]) == pytest.approx(math.pi)
    assert deviation_angle([0, 0, 1], [1, 0, 0]) == pytest.approx(math.pi / 2)


def test_angle_bin_edges():
    assert angle_bin([0.0, math.pi, math.pi / 15, math.pi / 15 + 1e-9], 15).tolist() == [1, 15, 1, 2]


def test_mask_defaults():
    keep, n_red = redundant_bin_mask(5, 5, 15, 20.0)
    assert n_red == 30
    assert keep.size == 375 and keep.sum() == 345
    cells = np.flatnonzero(~keep.reshape(25, 15).any(axis=1))
    # (I_lh, I_pr) in {(1,5), (5,5)}
    assert [(c // 5 + 1, c % 5 + 1) for c in cells] == [(1, 5), (5, 5)]


def test_mask_single_cell():
    assert redundant_bin_mask(1, 1, 7)[1] == 0


@pytest.mark.parametrize("n_lh, n_pr", [(5, 5), (3, 7), (8, 4), (10, 10), (2, 2), (20, 3)])
def test_mask_matches_sampling_oracle(n_lh, n_pr):
    keep, _ = redundant_bin_mask(n_lh, n_pr, 1)
    assert np.array_equal(~keep.reshape(n_lh, n_pr), sampled_cell_mask(n_lh, n_pr))


def test_feature_length_and_sum(small_blob):
    mr = small_blob.resolution
    f = compute_sdass(small_blob, small_blob.points[0], SdassParams(), mr)
    assert len(f) == 345
    assert f.values.sum() == pytest.approx(1.0, abs=1e-12)
    assert (f.values >= 0).all()


def test_feature_matches_naive_pipeline():
    cloud = bumpy_patch(500)
    mr = cloud.resolution
    params = SdassParams(support_radius_mr=8.0)
    keypoint = cloud.points[np.argmin(np.linalg.norm(cloud.points, axis=1))]
    f = compute_sdass(cloud, keypoint, params, mr)
    ref = naive_sdass(cloud.points, keypoint, mr, R_mr=8.0).reshape(-1)
    keep, _ = redundant_bin_mask(5, 5, 15)
    assert ref[~keep].sum() == 0
    np.testing.assert_allclose(f.values, ref[keep] / ref[keep].sum(), atol=1e-12)
    assert f.n_points == int(ref.sum())


def test_full_histogram_masked_entries_zero(blob):
    mr = blob.resolution
    params = SdassParams()
    lma = LmaField(blob, params.lma_radius_mr * mr)
    keep, _ = redundant_bin_mask(5, 5, 15)
    R = params.support_radius_mr * mr
    for i in range(0, 5000, 250):
        p = blob.points[i]
        lra = compute_lra(blob, p, R)
        idx = blob.index.radius(p, R)
        axes, ok = lma.get(idx)
        hist = _histogram(transform_to_local(blob.points[idx[ok]], p, lra), axes[ok], lra, R, params)
        assert hist[~keep].sum() == 0
        f = compute_sdass(blob, p, params, mr, lma=lma)
        np.testing.assert_array_equal(f.values, hist[keep] / hist[keep].sum())


def test_rigid_invariance(torus):
    mr = torus.resolution
    t = random_rigid_transform(11, mr)
    moved = apply_transform(torus, t)
    for i in range(0, 5000, 500):
        a = compute_sdass(torus, torus.points[i], SdassParams(), mr)
        b = compute_sdass(moved, moved.points[i], SdassParams(), mr)
        assert np.linalg.norm(a.values - b.values) <= 1e-6


def test_azimuth_independence(small_blob):
    mr = small_blob.resolution
    params = SdassParams()
    R = params.support_radius_mr * mr
    p = small_blob.points[42]
    lra = compute_lra(small_blob, p, R)
    idx = small_blob.index.radius(p, R)
    axes, ok = LmaField(small_blob, 7 * mr).get(idx)
    local = transform_to_local(small_blob.points[idx[ok]], p, lra)
    base = _histogram(local, axes[ok], lra, R, params)
    for phi in np.linspace(0.1, 6.0, 7):
        c, s = math.cos(phi), math.sin(phi)
        spun = local @ np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]]).T
        np.testing.assert_array_equal(_histogram(spun, axes[ok], lra, R, params), base)


def test_duplicated_points_same_feature(small_blob):
    mr = small_blob.resolution
    dup = PointCloud(np.concatenate([small_blob.points, small_blob.points]))
    for i in (3, 300, 900):
        a = compute_sdass(small_blob, small_blob.points[i], SdassParams(), mr)
        b = compute_sdass(dup, small_blob.points[i], SdassParams(), mr)
        np.testing.assert_allclose(a.values, b.values, atol=1e-9)


def test_degenerate_keypoint_raises():
    c = PointCloud([[0, 0, 0], [0.1, 0, 0], [9, 9, 9], [9, 9, 9.1]])
    with pytest.raises(DegenerateKeypointError):
        compute_sdass(c, [0, 0, 0], SdassParams(), 0.1)


def test_empty_feature_raises():
    # LRA fine at 20 mr, but every neighbor LMA (0.05 mr) is degenerate.
    c = PointCloud(np.random.default_rng(0).normal(size=(30, 3)))
    with pytest.raises(EmptyFeatureError):
        compute_sdass(c, c.points[0], SdassParams(lma_radius_mr=0.001), 1.0)


def test_describe_batch_equals_singles(small_blob):
    mr = small_blob.resolution
    kps = small_blob.points[::97]
    batch = describe_keypoints(small_blob, kps, SdassParams(), mr)
    for r, p in zip(batch, kps):
        single = compute_sdass(small_blob, p, SdassParams(), mr)
        np.testing.assert_array_equal(r.feature.values, single.values)
    one = describe_keypoints(small_blob, kps[:1], SdassParams(), mr)
    np.testing.assert_array_equal(one[0].feature.values, batch[0].feature.values)


def test_describe_deterministic_and_threaded(small_blob):
    mr = small_blob.resolution
    kps = small_blob.points[::150]
    a = describe_keypoints(small_blob, kps, mr=mr)
    b = describe_keypoints(small_blob, kps, mr=mr, workers=4)
    c = describe_keypoints(small_blob, kps[::-1], mr=mr)[::-1]
    for x, y, z in zip(a, b, c):
        np.testing.assert_array_equal(x.feature.values, y.feature.values)
        np.testing.assert_array_equal(x.feature.values, z.feature.values)


def test_describe_records_failures(small_blob):
    mr = small_blob.resolution
    kps = np.vstack([small_blob.points[:2], [[50.0, 50, 50]], small_blob.points[2:3]])
    res = describe_keypoints(small_blob, kps, mr=mr)
    assert [r.ok for r in res] == [True, True, False, True]
    assert "DegenerateKeypointError" in res[2].reason


def test_describe_spin(small_blob):
    res = describe_keypoints(small_blob, small_blob.points[:3], descriptor="spin")
    assert all(len(r.feature) == 225 for r in res)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_feature_normalized_property(seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(300, 3)) * rng.uniform(0.1, 10, size=3)
    cloud = PointCloud(pts)
    try:
        f = compute_sdass(cloud, pts[rng.integers(300)], SdassParams(support_radius_mr=6), cloud.resolution)
    except (DegenerateKeypointError, EmptyFeatureError):
        return
    assert (f.values >= 0).all()
    assert abs(f.values.sum() - 1.0) <= 1e-9
