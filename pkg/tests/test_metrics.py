import numpy as np
import pytest
from scipy.linalg import logm

from clap_estimate.errors import EmptyPointSet, LogDomainError
from clap_estimate.lie import Pose, gl3_exp, se3_exp
from clap_estimate.metrics import (
    HomographyFrobeniusMetric,
    HomographyLieMetric,
    LieLogMetric,
    PointSetMetric,
    RelativeTransformMetric,
    Se3MetricConfig,
    get_metric,
    homography_frobenius_distance,
    homography_lie_distance,
    lie_log_distance,
    point_set_distance,
    relative_transform_error,
)

from conftest import random_gl3_near_identity, random_pose


def test_relative_transform_error_hand_case():
    A = Pose.identity()
    B = se3_exp([1.0, 2.0, 2.0, 0.0, 0.0, 0.0])
    assert relative_transform_error(A, B) == pytest.approx((3.0, 0.0))
    C = Pose(se3_exp([0, 0, 0, 0, 0, 0.4]).R, np.zeros(3))
    assert relative_transform_error(A, C) == pytest.approx((0.0, 0.4))


def test_lie_log_distance_matches_matrix_log(rng):
    for _ in range(50):
        A, B = random_pose(rng, 2.5), random_pose(rng, 2.5)
        L = np.real(logm(np.linalg.inv(A.as_matrix()) @ B.as_matrix()))
        rho = L[:3, 3]
        phi = np.array([L[2, 1], L[0, 2], L[1, 0]])
        for lam in (1.0, 0.3):
            ref = np.sqrt(rho @ rho + lam**2 * phi @ phi)
            assert lie_log_distance(A, B, lam) == pytest.approx(ref, abs=1e-8)
            assert lie_log_distance(A, B, Se3MetricConfig(lam=lam)) == pytest.approx(ref, abs=1e-8)


def test_point_set_distance(rng):
    P = rng.normal(size=(7, 3))
    A, B = random_pose(rng), random_pose(rng)
    ref = np.sqrt(np.mean([np.sum((A.R @ p + A.t - B.R @ p - B.t) ** 2) for p in P]))
    assert point_set_distance(A, B, P) == pytest.approx(ref)
    with pytest.raises(EmptyPointSet):
        point_set_distance(A, B, np.zeros((0, 3)))


def test_homography_lie_distance_matches_logm(rng):
    for _ in range(50):
        A = random_gl3_near_identity(rng, 0.4)
        B = random_gl3_near_identity(rng, 0.4)
        a = A / np.cbrt(np.linalg.det(A))
        b = B / np.cbrt(np.linalg.det(B))
        ref = np.linalg.norm(np.real(logm(np.linalg.inv(a) @ b)))
        assert homography_lie_distance(A, B) == pytest.approx(ref, abs=1e-9)


def test_homography_lie_distance_out_of_domain():
    A = np.eye(3)
    B = np.diag([-1.0, -1.0, 1.0])
    with pytest.raises(LogDomainError):
        homography_lie_distance(A, B)


def test_homography_frobenius_sign_invariant(rng):
    A = rng.normal(size=(3, 3))
    assert homography_frobenius_distance(A, -A) == pytest.approx(0.0, abs=1e-12)


def test_metric_axioms_se3():
    rng = np.random.default_rng(70)
    pts = rng.normal(size=(5, 3))
    for _ in range(1000):
        A, B, G = random_pose(rng, 3.0), random_pose(rng, 3.0), random_pose(rng, 3.0)
        d = lie_log_distance(A, B)
        assert d >= 0
        assert abs(d - lie_log_distance(B, A)) < 1e-10
        assert abs(d - lie_log_distance(G @ A, G @ B)) < 1e-9
        s = point_set_distance(A, B, pts)
        assert s >= 0 and abs(s - point_set_distance(B, A, pts)) < 1e-10
        e = relative_transform_error(A, B)
        e2 = relative_transform_error(B, A)
        assert abs(e[0] - e2[0]) < 1e-10 and abs(e[1] - e2[1]) < 1e-10


def test_metric_axioms_homography():
    rng = np.random.default_rng(71)
    for _ in range(1000):
        A = random_gl3_near_identity(rng, 0.3)
        B = random_gl3_near_identity(rng, 0.3)
        s, u = rng.uniform(0.1, 10), -rng.uniform(0.1, 10)
        d = homography_lie_distance(A, B)
        assert d >= 0
        assert abs(d - homography_lie_distance(B, A)) < 1e-10
        assert abs(d - homography_lie_distance(s * A, u * B)) < 1e-9
        f = homography_frobenius_distance(A, B)
        assert f >= 0
        assert abs(f - homography_frobenius_distance(B, A)) < 1e-10
        assert abs(f - homography_frobenius_distance(s * A, u * B)) < 1e-9
    assert homography_lie_distance(A, 5 * A) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("metric", [LieLogMetric(0.5), RelativeTransformMetric(2.0)])
def test_pairwise_matches_scalar_se3(rng, metric):
    poses = [random_pose(rng) for _ in range(25)]
    D, fb = metric.pairwise(poses)
    assert fb == 0
    assert np.array_equal(D, D.T)
    assert np.all(np.diag(D) == 0)
    for i in range(25):
        for j in range(25):
            if i != j:
                assert D[i, j] == pytest.approx(metric(poses[i], poses[j]), abs=1e-12)
    d, _ = metric.to_center(poses, poses[3])
    assert np.allclose(d, D[3], atol=1e-12)


def test_point_set_metric_pairwise(rng):
    pts = rng.normal(size=(4, 3))
    poses = [random_pose(rng) for _ in range(10)]
    D, _ = PointSetMetric(pts).pairwise(poses)
    assert D[2, 7] == pytest.approx(point_set_distance(poses[2], poses[7], pts))


def _on_branch_cut(M):
    ev = np.linalg.eigvals(M)
    return bool(np.any((np.abs(ev.imag) < 1e-9) & (ev.real <= 0)))


def test_hlie_pairwise_falls_back_and_counts(rng):
    good = [random_gl3_near_identity(rng, 0.2) for _ in range(6)]
    flipped = [np.diag([-1.0, -1.0, 1.0]) @ g for g in good[:3]]
    items = good + flipped
    D, fb = HomographyLieMetric().pairwise(items)
    expected = 0
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            if _on_branch_cut(np.linalg.inv(items[i]) @ items[j]):
                expected += 1
                assert D[i, j] == pytest.approx(homography_frobenius_distance(items[i], items[j]))
            else:
                assert D[i, j] == pytest.approx(homography_lie_distance(items[i], items[j]))
    assert fb == expected > 0


def test_hfro_pairwise(rng):
    items = [rng.normal(size=(3, 3)) for _ in range(8)]
    D, fb = HomographyFrobeniusMetric().pairwise(items)
    assert fb == 0
    assert D[1, 4] == pytest.approx(homography_frobenius_distance(items[1], items[4]))


def test_get_metric():
    assert isinstance(get_metric("lielog"), LieLogMetric)
    assert isinstance(get_metric("hlie"), HomographyLieMetric)
    with pytest.raises(ValueError):
        get_metric("nope")
    with pytest.raises(ValueError):
        get_metric("pointset")


def test_large_pairwise_chunking(rng):
    Hs = gl3_exp(rng.uniform(-0.3, 0.3, size=(600, 3, 3)))
    D, _ = HomographyLieMetric().pairwise(list(Hs))
    i, j = 17, 588
    assert D[i, j] == pytest.approx(homography_lie_distance(Hs[i], Hs[j]))
