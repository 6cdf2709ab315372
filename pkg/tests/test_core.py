import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from monovo.core import (
    CameraIntrinsics,
    Pose,
    RansacConfig,
    angle_between,
    compose,
    inverse,
    match_arrays,
    matches_from_arrays,
    normalize,
    orthonormalize,
    project,
    ransac_iterations_needed,
    rotation_angle,
    skew,
    so3_exp,
)
from monovo.errors import PointBehindCamera

from oracles import angle_of, cross, hom, random_rotation

seeds = st.integers(0, 2**32 - 1)
K = CameraIntrinsics(500.0, 480.0, 320.0, 240.0)


def rand_pose(seed):
    rng = np.random.default_rng(seed)
    return Pose(random_rotation(rng), rng.normal(size=3) * 3)


@given(seeds, seeds)
def test_compose_matches_homogeneous_product(s1, s2):
    a, b = rand_pose(s1), rand_pose(s2)
    expect = hom(a.rotation, a.translation) @ hom(b.rotation, b.translation)
    np.testing.assert_allclose(compose(a, b).matrix, expect, atol=1e-12)
    np.testing.assert_allclose((a @ b).matrix, expect, atol=1e-12)


@given(seeds)
def test_inverse_round_trip(s):
    p = rand_pose(s)
    ident = compose(p, inverse(p))
    np.testing.assert_allclose(ident.matrix, np.eye(4), atol=1e-12)
    np.testing.assert_allclose(inverse(p).matrix, np.linalg.inv(hom(p.rotation, p.translation)), atol=1e-10)


@given(seeds)
def test_composition_is_associative(s):
    a, b, c = rand_pose(s), rand_pose(s + 1), rand_pose(s + 2)
    np.testing.assert_allclose(compose(compose(a, b), c).matrix, compose(a, compose(b, c)).matrix, atol=1e-10)


@given(seeds)
def test_skew_matches_cross_product(s):
    rng = np.random.default_rng(s)
    a, b = rng.normal(size=3), rng.normal(size=3)
    np.testing.assert_allclose(skew(a) @ b, cross(a, b), atol=1e-12)
    np.testing.assert_allclose(skew(a).T, -skew(a))


@given(seeds)
def test_so3_exp_is_rotation_with_expected_angle(s):
    rng = np.random.default_rng(s)
    w = rng.normal(size=3)
    w *= rng.uniform(0, 3.0) / np.linalg.norm(w)
    r = so3_exp(w)
    assert Pose(r, np.zeros(3)).is_valid()
    assert rotation_angle(r) == pytest.approx(np.linalg.norm(w), abs=1e-9)
    np.testing.assert_allclose(r @ w, w, atol=1e-12)


def test_so3_exp_small_angle_branch():
    w = np.array([1e-10, -2e-10, 3e-10])
    np.testing.assert_allclose(so3_exp(w), np.eye(3) + skew(w), atol=1e-18)


@given(seeds)
def test_orthonormalize_is_identity_on_rotations_and_projects_noise(s):
    rng = np.random.default_rng(s)
    r = random_rotation(rng)
    np.testing.assert_allclose(orthonormalize(r), r, atol=1e-12)
    noisy = r + rng.normal(scale=1e-3, size=(3, 3))
    q = orthonormalize(noisy)
    np.testing.assert_allclose(q.T @ q, np.eye(3), atol=1e-12)
    assert np.linalg.det(q) == pytest.approx(1.0)


@given(seeds)
def test_rotation_angle_matches_oracle(s):
    r = random_rotation(np.random.default_rng(s))
    assert rotation_angle(r) == pytest.approx(angle_of(r), abs=1e-12)


def test_project_known_point():
    uv = project(np.array([1.0, -0.5, 2.0]), Pose.identity(), K)
    np.testing.assert_allclose(uv, [320 + 250, 240 - 120])


def test_project_rejects_points_behind():
    with pytest.raises(PointBehindCamera):
        project(np.array([[0, 0, 1.0], [0, 0, -1.0]]), Pose.identity(), K)
    with pytest.raises(PointBehindCamera):
        project(np.array([0, 0, 0.0]), Pose.identity(), K)


@given(seeds)
def test_normalize_inverts_projection(s):
    rng = np.random.default_rng(s)
    p = rng.uniform([-3, -3, 1], [3, 3, 20], size=(10, 3))
    uv = project(p, Pose.identity(), K)
    np.testing.assert_allclose(normalize(uv, K), p / p[:, 2:], atol=1e-12)
    np.testing.assert_allclose(K.inv_matrix @ K.matrix, np.eye(3), atol=1e-15)


def test_intrinsics_reject_nonpositive_focal():
    with pytest.raises(ValueError):
        CameraIntrinsics(0.0, 1.0, 0, 0)


def test_pose_validation_and_immutability():
    with pytest.raises(ValueError):
        Pose(np.eye(2), np.zeros(3))
    p = Pose.identity()
    assert p.is_valid()
    with pytest.raises(ValueError):
        p.rotation[0, 0] = 2.0
    assert not Pose(np.diag([1.0, 1.0, -1.0]), np.zeros(3)).is_valid()
    assert not Pose(np.eye(3), [np.nan, 0, 0]).is_valid()


def test_ransac_config_validation_and_streams():
    with pytest.raises(ValueError):
        RansacConfig(confidence=1.0)
    with pytest.raises(ValueError):
        RansacConfig(threshold=0.0)
    with pytest.raises(ValueError):
        RansacConfig(max_iterations=0)
    cfg = RansacConfig(seed=7)
    a = cfg.rng(3).integers(0, 1000, size=8)
    b = cfg.rng(3).integers(0, 1000, size=8)
    c = cfg.rng(4).integers(0, 1000, size=8)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_iterations_needed_known_values():
    # 50% inliers, 8-point samples, 99% confidence
    expect = np.log(0.01) / np.log(1 - 0.5**8)
    assert ransac_iterations_needed(0.5, 8, 0.99) == pytest.approx(expect)
    assert ransac_iterations_needed(1.0, 8, 0.99) == 0.0
    assert ransac_iterations_needed(0.0, 8, 0.99) == np.inf
    assert ransac_iterations_needed(1e-9, 8, 0.99) > 1e60


@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_iterations_needed_monotone(w1, w2):
    lo, hi = sorted((w1, w2))
    assert ransac_iterations_needed(hi, 5, 0.99) <= ransac_iterations_needed(lo, 5, 0.99)


def test_angle_between():
    assert angle_between([1, 0, 0], [0, 1, 0]) == pytest.approx(np.pi / 2)
    assert angle_between([1, 1, 0], [2, 2, 0]) == pytest.approx(0.0, abs=1e-7)


def test_match_array_round_trip():
    prev = np.arange(10.0).reshape(5, 2)
    curr = prev + 0.5
    ms = matches_from_arrays(prev, curr, ids=[10, 11, 12, 13, 14])
    assert [m.id for m in ms] == [10, 11, 12, 13, 14]
    a, b = match_arrays(ms)
    np.testing.assert_array_equal(a, prev)
    np.testing.assert_array_equal(b, curr)
    a, b = match_arrays([])
    assert a.shape == (0, 2) and b.shape == (0, 2)
