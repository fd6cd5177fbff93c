import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm, logm

from clap_estimate.errors import DegenerateHomography, LogDomainError
from clap_estimate.lie import (
    DET1,
    H33,
    Homography,
    Pose,
    apply_homography,
    det3,
    gl3_exp,
    gl3_log,
    gl3_log_batch,
    hat,
    in_log_domain,
    inv3,
    left_jacobian,
    normalize_homography,
    se3_exp,
    se3_exp_arrays,
    se3_log,
    se3_log_arrays,
    so3_exp,
    so3_log,
    vee,
)

from conftest import random_gl3_near_identity, random_pose

finite = st.floats(-3.0, 3.0, allow_nan=False)
vec3 = st.tuples(finite, finite, finite).map(np.array)


def se3_matrix(xi):
    """4x4 twist matrix, exponentiated by scipy as an independent oracle."""
    X = np.zeros((4, 4))
    X[:3, :3] = hat(xi[3:])
    X[:3, 3] = xi[:3]
    return X


class TestSO3:
    def test_hat_vee(self):
        v = np.array([1.0, -2.0, 0.5])
        S = hat(v)
        assert np.allclose(S, -S.T)
        assert np.allclose(vee(S), v)
        w = np.array([0.3, 0.1, -0.7])
        assert np.allclose(S @ w, np.cross(v, w))

    def test_exp_matches_expm(self, rng):
        for _ in range(200):
            w = rng.normal(size=3) * rng.uniform(0, 3)
            assert np.allclose(so3_exp(w), expm(hat(w)), atol=1e-13)

    def test_exp_small_angles(self):
        for theta in [0.0, 1e-12, 1e-9, 1e-6, 1e-5, 2e-5, 1e-3]:
            w = theta * np.array([0.6, -0.8, 0.0])
            assert np.allclose(so3_exp(w), expm(hat(w)), atol=1e-15)

    def test_log_roundtrip_near_pi(self, rng):
        for _ in range(100):
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            theta = np.pi - rng.uniform(0, 1e-6)
            w = axis * theta
            R = so3_exp(w)
            assert np.allclose(so3_exp(so3_log(R)), R, atol=1e-9)
            assert np.linalg.norm(so3_log(R)) == pytest.approx(theta, abs=1e-6)

    def test_log_exactly_pi(self):
        R = np.diag([1.0, -1.0, -1.0])
        w = so3_log(R)
        assert np.linalg.norm(w) == pytest.approx(np.pi)
        assert np.allclose(so3_exp(w), R, atol=1e-12)

    def test_log_identity(self):
        assert np.allclose(so3_log(np.eye(3)), 0.0)

    def test_vectorized_matches_scalar(self, rng):
        W = rng.normal(size=(50, 3))
        R = so3_exp(W)
        for k in range(50):
            assert np.allclose(R[k], so3_exp(W[k]))
        assert np.allclose(so3_log(R), np.stack([so3_log(r) for r in R]))

    @given(vec3)
    @settings(max_examples=200, deadline=None)
    def test_rotation_properties(self, w):
        R = so3_exp(w)
        assert np.allclose(R @ R.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)

    @given(vec3)
    @settings(max_examples=200, deadline=None)
    def test_log_inverts_exp(self, w):
        if np.linalg.norm(w) >= np.pi - 1e-3:
            w = w / np.linalg.norm(w) * (np.pi - 1e-3)
        assert np.allclose(so3_log(so3_exp(w)), w, atol=1e-9)


class TestSE3:
    def test_exp_matches_4x4_expm(self, rng):
        for _ in range(200):
            xi = np.r_[rng.normal(scale=2, size=3), rng.normal(size=3)]
            T = se3_exp(xi)
            assert np.allclose(T.as_matrix(), expm(se3_matrix(xi)), atol=1e-12)

    def test_log_matches_4x4_logm(self, rng):
        for _ in range(100):
            T = random_pose(rng, max_angle=3.0)
            L = np.real(logm(T.as_matrix()))
            xi = se3_log(T)
            assert np.allclose(se3_matrix(xi), L, atol=1e-8)

    def test_roundtrip_1000(self):
        rng = np.random.default_rng(7)
        phi = rng.normal(size=(1000, 3))
        phi *= (rng.uniform(0, 3.0, size=1000) / np.linalg.norm(phi, axis=1))[:, None]
        xi = np.c_[rng.normal(scale=5, size=(1000, 3)), phi]
        R, t = se3_exp_arrays(xi)
        back = se3_log_arrays(R, t)
        assert np.max(np.abs(back - xi)) < 1e-8

    def test_left_jacobian_derivative(self, rng):
        # d/ds exp(phi + s*delta) at s = 0 equals hat(J_l(phi) delta) exp(phi)
        for _ in range(20):
            phi = rng.normal(size=3)
            delta = rng.normal(size=3)
            h = 1e-6
            num = (so3_exp(phi + h * delta) - so3_exp(phi - h * delta)) / (2 * h)
            ana = hat(left_jacobian(phi) @ delta) @ so3_exp(phi)
            assert np.allclose(num, ana, atol=1e-7)

    def test_pose_group_ops(self, rng):
        A, B, C = (random_pose(rng) for _ in range(3))
        assert ((A @ B) @ C).allclose(A @ (B @ C))
        assert (A @ A.inverse()).allclose(Pose.identity())
        p = rng.normal(size=(5, 3))
        assert np.allclose(A.apply(p), (A.as_matrix() @ np.c_[p, np.ones(5)].T).T[:, :3])

    def test_pose_rejects_non_rotation(self):
        with pytest.raises(ValueError):
            Pose.from_json({"R": np.diag([1.0, 1.0, -1.0]).tolist(), "t": [0, 0, 0]})
        with pytest.raises(ValueError):
            Pose.from_json({"R": (2 * np.eye(3)).tolist(), "t": [0, 0, 0]})

    def test_pose_json_roundtrip(self, rng):
        T = random_pose(rng)
        assert Pose.from_json(T.to_json()).allclose(T, atol=0)

    def test_identity_twist(self):
        assert se3_exp(np.zeros(6)).allclose(Pose.identity(), atol=0)


class TestGL3:
    def test_exp_matches_expm(self, rng):
        A = rng.normal(size=(100, 3, 3)) * 2
        E = gl3_exp(A)
        for k in range(100):
            ref = expm(A[k])
            assert np.allclose(E[k], ref, rtol=1e-12, atol=1e-12 * np.abs(ref).max())

    def test_log_matches_logm(self, rng):
        for _ in range(100):
            M = random_gl3_near_identity(rng, 0.8)
            assert np.allclose(gl3_log(M), np.real(logm(M)), atol=1e-10)

    def test_log_eigendecomposition_oracle(self, rng):
        # diagonalizable with positive eigenvalues: log = V diag(log lambda) V^-1
        for _ in range(100):
            V = rng.normal(size=(3, 3))
            lam = rng.uniform(0.05, 20, size=3)
            M = V @ np.diag(lam) @ np.linalg.inv(V)
            ref = V @ np.diag(np.log(lam)) @ np.linalg.inv(V)
            assert np.allclose(gl3_log(M), ref, atol=1e-8 * max(1, np.abs(ref).max()))

    def test_roundtrip_500(self):
        rng = np.random.default_rng(11)
        A = rng.uniform(-1, 1, size=(500, 3, 3))
        M = gl3_exp(A)
        L, ok = gl3_log_batch(M)
        assert ok.all()
        assert np.max(np.linalg.norm(gl3_exp(L) - M, axis=(1, 2))) < 1e-8

    def test_log_of_translation_is_exact(self):
        a, b = 3.0, -4.0
        M = np.array([[1, 0, a], [0, 1, b], [0, 0, 1.0]])
        L = gl3_log(M)
        assert np.allclose(L, [[0, 0, a], [0, 0, b], [0, 0, 0]], atol=1e-14)

    def test_negative_eigenvalue_raises(self):
        with pytest.raises(LogDomainError):
            gl3_log(np.diag([-1.0, 2.0, 3.0]))
        with pytest.raises(LogDomainError):
            gl3_log(np.diag([1.0, 1.0, 0.0]))

    def test_rotation_by_pi_raises(self):
        # eigenvalues -1, -1 sit on the branch cut
        with pytest.raises(LogDomainError):
            gl3_log(np.diag([-1.0, -1.0, 1.0]))

    def test_domain_check_agrees_with_eigvals(self, rng):
        M = rng.normal(size=(2000, 3, 3))
        ev = np.linalg.eigvals(M)
        on_cut = np.any((np.abs(ev.imag) < 1e-9) & (ev.real <= 0), axis=1)
        assert np.array_equal(in_log_domain(M), ~on_cut)

    def test_batch_flags_match_single(self, rng):
        M = rng.normal(size=(200, 3, 3))
        L, ok = gl3_log_batch(M)
        for k in range(200):
            if ok[k]:
                assert np.allclose(gl3_log(M[k]), L[k])
                assert np.allclose(gl3_exp(L[k]), M[k], atol=1e-8 * np.abs(M[k]).max())
            else:
                assert np.all(np.isnan(L[k]))

    def test_det3_inv3(self, rng):
        M = rng.normal(size=(50, 3, 3))
        assert np.allclose(det3(M), np.linalg.det(M))
        assert np.allclose(inv3(M), np.linalg.inv(M))


class TestHomography:
    def test_normalizations(self, rng):
        H = rng.normal(size=(3, 3))
        a = normalize_homography(H, H33)
        b = normalize_homography(-3.7 * H, H33)
        assert a.H[2, 2] == 1.0
        assert np.allclose(a.H, b.H)
        d = normalize_homography(H, DET1)
        assert np.linalg.det(d.H) == pytest.approx(1.0)

    def test_det1_positive_for_any_sign(self, rng):
        for _ in range(20):
            H = rng.normal(size=(3, 3))
            assert np.linalg.det(normalize_homography(H, DET1).H) == pytest.approx(1.0)
            assert np.linalg.det(normalize_homography(-H, DET1).H) == pytest.approx(1.0)

    def test_degenerate(self):
        with pytest.raises(DegenerateHomography):
            normalize_homography(np.zeros((3, 3)))
        with pytest.raises(DegenerateHomography):
            normalize_homography(np.array([[1, 0, 0], [0, 1, 0], [0, 1, 0.0]]), H33)

    def test_apply_and_inverse(self, rng):
        H = Homography(np.array([[1.1, 0.1, 5], [-0.05, 0.9, -3], [1e-4, 2e-4, 1.0]]))
        P = rng.uniform(0, 100, size=(20, 2))
        Q = H.apply(P)
        assert np.allclose(H.inverse().apply(Q), P)

    def test_apply_at_infinity(self):
        H = np.array([[1, 0, 0], [0, 1, 0], [1, 0, 0.0]])
        out = apply_homography(H, np.array([[0.0, 5.0], [1.0, 1.0]]))
        assert np.all(np.isinf(out[0]))
        assert np.allclose(out[1], [1.0, 1.0])

    def test_json_roundtrip(self, rng):
        H = normalize_homography(rng.normal(size=(3, 3)))
        assert np.array_equal(Homography.from_json(H.to_json()).H, H.H)
