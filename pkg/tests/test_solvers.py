import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import binomtest

from clap_estimate.errors import DegenerateConfiguration, InsufficientValidCandidates, TooFewObservations
from clap_estimate.harness import lie_distance_to_gt
from clap_estimate.lie import Pose, so3_exp
from clap_estimate.solvers import (
    LandmarkMap,
    Matches,
    alignment_rms,
    count_class_consistent,
    dlt_batch,
    dlt_homography,
    draw_subsets,
    enumerate_pose_candidates,
    sample_homography_candidates,
    svd_align,
)
from clap_estimate.synth import SynthMatchParams, random_homography, synth_matches_2d

from conftest import random_pose


def sse(T, src, dst):
    return float(np.sum((T.apply(src) - dst) ** 2))


class TestSvdAlign:
    def test_recovers_noiseless_pose_100_seeds(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            T = random_pose(rng)
            src = rng.normal(scale=2, size=(rng.integers(3, 12), 3))
            est = svd_align(src, T.apply(src))
            assert est.allclose(T, atol=1e-9)
            assert np.linalg.det(est.R) == pytest.approx(1.0, abs=1e-12)

    def test_minimizes_sse_against_perturbations(self, rng):
        # least-squares optimality: any small perturbation of the estimate raises the SSE
        for _ in range(20):
            src = rng.normal(size=(8, 3))
            dst = random_pose(rng).apply(src) + rng.normal(scale=0.1, size=(8, 3))
            est = svd_align(src, dst)
            base = sse(est, src, dst)
            for _ in range(50):
                dR = so3_exp(rng.normal(scale=1e-3, size=3))
                dt = rng.normal(scale=1e-3, size=3)
                assert sse(Pose(dR @ est.R, est.t + dt), src, dst) >= base - 1e-12

    def test_never_returns_reflection(self, rng):
        # a mirrored point set: the best proper rotation, never det = -1
        src = rng.normal(size=(6, 3))
        dst = src * np.array([1.0, 1.0, -1.0])
        est = svd_align(src, dst)
        assert np.linalg.det(est.R) == pytest.approx(1.0)

    def test_collinear_is_degenerate(self):
        src = np.array([[0, 0, 0], [1, 1, 1], [2, 2, 2.0]])
        with pytest.raises(DegenerateConfiguration):
            svd_align(src, src)
        with pytest.raises(DegenerateConfiguration):
            svd_align(src[:2], src[:2])

    def test_alignment_rms(self, rng):
        src = rng.normal(size=(5, 3))
        T = random_pose(rng)
        assert alignment_rms(T, src, T.apply(src)) == pytest.approx(0.0, abs=1e-12)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_equivariance(self, seed):
        rng = np.random.default_rng(seed)
        src = rng.normal(size=(5, 3))
        dst = rng.normal(size=(5, 3))
        G = random_pose(rng)
        a = svd_align(src, dst)
        b = svd_align(src, G.apply(dst))
        assert (G @ a).allclose(b, atol=1e-8)


def brute_count(obs: LandmarkMap, mp: LandmarkMap) -> int:
    n = 0
    for tri in itertools.combinations(range(len(obs)), 3):
        for combo in itertools.permutations(range(len(mp)), 3):
            if all(obs[i].label == mp[j].label for i, j in zip(tri, combo)):
                n += 1
    return n


def labeled(rng, n, labels):
    return LandmarkMap.from_arrays(rng.normal(scale=3, size=(n, 3)), [labels[k % len(labels)] for k in range(n)])


class TestEnumeration:
    def test_count_matches_brute_force(self, rng):
        for _ in range(10):
            mp = labeled(rng, rng.integers(3, 9), "ABC")
            obs = labeled(rng, rng.integers(3, 7), "ABCA")
            assert count_class_consistent(obs, mp) == brute_count(obs, mp)

    def test_candidates_include_truth(self, rng):
        mp = labeled(rng, 8, "AB")
        T = random_pose(rng)
        obs = LandmarkMap.from_arrays(T.inverse().apply(mp.positions[:5]), mp.point_labels[:5])
        cands = enumerate_pose_candidates(obs, mp)
        assert len(cands) == count_class_consistent(obs, mp)
        exact = [c for c in cands if c.residual < 1e-9]
        assert exact and all(c.residual >= 0 for c in cands)
        assert any(c.pose.allclose(T, 1e-8) for c in exact)
        for c in cands[:20]:
            (oi, mj) = c.source_indices
            assert all(obs[i].label == mp[j].label for i, j in zip(oi, mj))

    def test_order_invariance(self, rng):
        mp = labeled(rng, 6, "AB")
        obs = labeled(rng, 5, "AB")
        perm = rng.permutation(5)
        shuffled = LandmarkMap([obs[i] for i in perm], obs.labels)
        a = enumerate_pose_candidates(obs, mp)
        b = enumerate_pose_candidates(shuffled, mp)
        assert len(a) == len(b)
        for x, y in zip(a, b):
            assert np.array_equal(x.pose.R, y.pose.R) and np.array_equal(x.pose.t, y.pose.t)

    def test_max_candidates_subsamples_whole_triplets(self, rng):
        mp = labeled(rng, 8, "AB")
        obs = labeled(rng, 7, "AB")
        full = enumerate_pose_candidates(obs, mp)
        sub = enumerate_pose_candidates(obs, mp, max_candidates=100, seed=3)
        assert 0 < len(sub) <= 100 < len(full)
        again = enumerate_pose_candidates(obs, mp, max_candidates=100, seed=3)
        assert [c.source_indices for c in sub] == [c.source_indices for c in again]

    def test_max_residual_gate(self, rng):
        mp = labeled(rng, 6, "AB")
        obs = labeled(rng, 5, "AB")
        full = enumerate_pose_candidates(obs, mp)
        gated = enumerate_pose_candidates(obs, mp, max_residual=0.5)
        assert len(gated) == sum(c.residual <= 0.5 for c in full)

    def test_too_few_observations(self, rng):
        with pytest.raises(TooFewObservations):
            enumerate_pose_candidates(labeled(rng, 2, "A"), labeled(rng, 5, "A"))

    def test_json_roundtrip(self, rng):
        mp = labeled(rng, 5, "XY")
        back = LandmarkMap.from_json(mp.to_json())
        assert np.array_equal(back.positions, mp.positions)
        assert back.point_labels == mp.point_labels

    def test_unknown_label_rejected(self):
        with pytest.raises(ValueError):
            LandmarkMap.from_json({"labels": ["A"], "landmarks": [{"p": [0, 0, 0], "c": "B"}]})


class TestDLT:
    def test_recovers_forward_synthesized_h_100_seeds(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            H = random_homography(rng, (640, 480), 0.3)
            p = rng.uniform(0, 640, size=(rng.integers(4, 30), 2))
            est = dlt_homography(Matches(p, H.apply(p)))
            assert lie_distance_to_gt(est, H) < 1e-8

    def test_collinear_source_is_degenerate(self):
        p = np.array([[0, 0], [1, 1], [2, 2], [5, 0.0]])
        q = np.array([[0, 0], [1, 0], [0, 1], [3, 3.0]])
        with pytest.raises(DegenerateConfiguration):
            dlt_homography(Matches(p, q))

    def test_repeated_points_are_degenerate(self):
        p = np.array([[0, 0], [0, 0], [1, 0], [0, 1.0]])
        with pytest.raises(DegenerateConfiguration):
            dlt_homography(Matches(p, p))

    def test_batch_matches_single(self, rng):
        src = rng.uniform(0, 100, size=(20, 4, 2))
        dst = rng.uniform(0, 100, size=(20, 4, 2))
        H, ok = dlt_batch(src, dst)
        for k in np.flatnonzero(ok):
            assert np.allclose(H[k], dlt_homography(Matches(src[k], dst[k])).H)

    def test_matches_json(self, rng):
        m = Matches(rng.normal(size=(5, 2)), rng.normal(size=(5, 2)))
        back = Matches.from_json(m.to_json())
        assert np.array_equal(back.p, m.p) and np.array_equal(back.q, m.q)


class TestSampling:
    def test_draw_subsets_distinct(self, rng):
        S = draw_subsets(rng, 10, 4, 500)
        assert S.shape == (500, 4)
        assert all(len(set(r)) == 4 for r in S.tolist())
        # every index equally likely to be drawn
        counts = np.bincount(S.ravel(), minlength=10)
        assert counts.min() > 150

    def test_all_inlier_fraction_is_hypergeometric(self):
        # P(4 draws without replacement all hit the 80 inliers of 200)
        n_in, n = 80, 200
        p = math.comb(n_in, 4) / math.comb(n, 4)
        hits = trials = 0
        for seed in range(5):
            ms = synth_matches_2d(SynthMatchParams(n_matches=n, outlier_fraction=0.6, seed=seed))
            cs = sample_homography_candidates(ms.matches, 400, seed)
            src = np.array(cs.sources)
            hits += int(ms.is_inlier[src].all(axis=1).sum())
            trials += len(src)
        assert binomtest(hits, trials, p).pvalue > 1e-3
        assert abs(hits / trials - 0.4**4) < 0.01

    def test_sampling_is_seeded(self):
        ms = synth_matches_2d(SynthMatchParams(outlier_fraction=0.3, noise_sigma=1.0, seed=1))
        a = sample_homography_candidates(ms.matches, 50, 9)
        b = sample_homography_candidates(ms.matches, 50, 9)
        assert a.sources == b.sources
        assert all(np.array_equal(x.H, y.H) for x, y in zip(a.items, b.items))

    def test_insufficient_candidates(self):
        p = np.c_[np.arange(6.0), np.arange(6.0)]
        with pytest.raises(InsufficientValidCandidates):
            sample_homography_candidates(Matches(p, p), 40, 0)
        with pytest.raises(DegenerateConfiguration):
            sample_homography_candidates(Matches(p[:3], p[:3]), 40, 0)
