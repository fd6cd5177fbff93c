"""Fixed-budget RANSAC baseline and the reprojection metrics shared with CLAP.

The iteration budget is never cut short: every configured draw is scored,
degenerate draws included, so comparisons against clustering run under the
same sampling budget.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateConfiguration, NoValidHypothesis
from .lie import H33, Homography, Pose, inv3, normalize_homography
from .solvers import (
    LandmarkMap,
    Matches,
    _svd_align_batch,
    dlt_batch,
    dlt_homography,
    draw_subsets,
)


@dataclass
class RansacConfig:
    iterations: int = 1000
    inlier_threshold: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.inlier_threshold <= 0:
            raise ValueError("inlier_threshold must be positive")


@dataclass
class RansacResult:
    homography: Homography
    inlier_indices: list[int]
    iterations_used: int
    degenerate_draws: int = 0
    best_iteration: int = -1


# ---------------------------------------------------------------------------
# reprojection error
# ---------------------------------------------------------------------------

def _project(H, P):
    """Apply stacked homographies ``(B, 3, 3)`` to points ``(N, 2)`` -> ``(B, N, 2)``."""
    x = np.einsum("bij,nj->bni", H[:, :2, :2], P) + H[:, None, :2, 2]
    w = np.einsum("bj,nj->bn", H[:, 2, :2], P) + H[:, None, 2, 2]
    bad = np.abs(w) < 1e-12
    out = x / np.where(bad, 1.0, w)[..., None]
    return out, bad


def sre_batch(H, matches: Matches) -> np.ndarray:
    """Per-match symmetric reprojection error for a stack of homographies ``(B, N)``."""
    H = np.asarray(H, dtype=float).reshape(-1, 3, 3)
    fwd, bad_f = _project(H, matches.p)
    bwd, bad_b = _project(inv3(H), matches.q)
    e = 0.5 * (np.linalg.norm(matches.q - fwd, axis=2) + np.linalg.norm(matches.p - bwd, axis=2))
    e[bad_f | bad_b] = np.inf
    return e


def symmetric_reprojection_error(H, matches: Matches) -> tuple[np.ndarray, float]:
    """``0.5 (|q - pi(H p)| + |p - pi(H^-1 q)|)`` per match, plus the mean.

    A match whose projective depth ``|w|`` is below ``1e-12`` in either
    direction scores ``+inf``, which then propagates into the mean.
    """
    if len(matches) == 0:
        raise ValueError("need at least one match")
    Hm = H.H if isinstance(H, Homography) else np.asarray(H, dtype=float)
    e = sre_batch(Hm, matches)[0]
    return e, float(np.mean(e))


def inlier_ratio(result, total: int) -> float:
    if total < 1:
        raise ValueError("total must be >= 1")
    idx = result.inlier_indices if hasattr(result, "inlier_indices") else result
    return len(idx) / total


def _inliers(H, matches, threshold):
    e = sre_batch(H, matches)[0]
    return np.flatnonzero(e <= threshold), e


def refine_homography(H, matches: Matches, inlier_threshold: float = 2.0, full_output: bool = False):
    """Re-fit ``H`` on its own inliers; keep the original if the fit gets worse.

    ``status`` (with ``full_output=True``) is one of ``"refined"``,
    ``"kept"`` (refit raised mean inlier SRE), ``"no_inliers"`` or
    ``"degenerate"``.
    """
    H0 = H if isinstance(H, Homography) else normalize_homography(H, H33)
    idx, e = _inliers(H0.H, matches, inlier_threshold)
    status = "refined"
    out = H0
    if len(idx) < 4:
        status = "no_inliers" if len(idx) == 0 else "degenerate"
    else:
        try:
            H1 = dlt_homography(matches[idx])
        except DegenerateConfiguration:
            status = "degenerate"
        else:
            e1 = sre_batch(H1.H, matches[idx])[0]
            if np.mean(e1) > np.mean(e[idx]):
                status = "kept"
            else:
                out = H1
    return (out, status) if full_output else out


# ---------------------------------------------------------------------------
# homography RANSAC
# ---------------------------------------------------------------------------

def _select_best(counts, mean_err, valid):
    """Most inliers, then lower mean inlier error, then lower iteration index."""
    idx = np.flatnonzero(valid)
    order = np.lexsort((idx, mean_err[idx], -counts[idx]))
    return int(idx[order[0]])


def ransac_homography(matches: Matches, cfg: RansacConfig | None = None) -> RansacResult:
    """DLT + RANSAC with exactly ``cfg.iterations`` seeded 4-point draws.

    Inliers are matches with symmetric reprojection error at most the
    threshold. The winning hypothesis is re-fit on its inliers and the inlier
    set is recomputed once against the refit.
    """
    cfg = cfg or RansacConfig()
    n = len(matches)
    if n < 4:
        raise DegenerateConfiguration("need at least 4 matches")
    rng = np.random.default_rng(cfg.seed)
    subsets = draw_subsets(rng, n, 4, cfg.iterations)
    H, ok = dlt_batch(matches.p[subsets], matches.q[subsets])
    if not ok.any():
        raise NoValidHypothesis(f"all {cfg.iterations} draws were degenerate")
    counts = np.zeros(cfg.iterations, dtype=int)
    mean_err = np.full(cfg.iterations, np.inf)
    valid = np.flatnonzero(ok)
    E = sre_batch(H[valid], matches)
    inl = E <= cfg.inlier_threshold
    counts[valid] = inl.sum(axis=1)
    with np.errstate(invalid="ignore"):
        mean_err[valid] = np.where(inl, E, 0.0).sum(axis=1) / np.maximum(counts[valid], 1)
    best = _select_best(counts, mean_err, ok)

    Hbest = H[best]
    best_inliers = np.flatnonzero(sre_batch(Hbest, matches)[0] <= cfg.inlier_threshold)
    final = Homography(Hbest, H33)
    if len(best_inliers) >= 4:
        try:
            final = dlt_homography(matches[best_inliers])
        except DegenerateConfiguration:
            pass
    inliers, _ = _inliers(final.H, matches, cfg.inlier_threshold)
    return RansacResult(final, [int(i) for i in inliers], cfg.iterations,
                        int(np.count_nonzero(~ok)), best)


# ---------------------------------------------------------------------------
# 3D pose RANSAC (triplet minimal sets, label-consistent nearest-landmark residual)
# ---------------------------------------------------------------------------

@dataclass
class RansacPoseResult:
    pose: Pose
    inlier_indices: list[int]
    iterations_used: int
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))


def landmark_residuals(R, t, obs_pos, obs_labels, map_pos, map_labels):
    """Distance from each transformed observation to the nearest same-label map landmark.

    ``R`` and ``t`` are stacks ``(B, 3, 3)`` / ``(B, 3)``; returns ``(B, n_obs)``
    residuals and the matching map indices.
    """
    X = np.einsum("bij,nj->bni", R, obs_pos) + t[:, None, :]
    d = np.linalg.norm(X[:, :, None, :] - map_pos[None, None], axis=-1)
    same = np.asarray(obs_labels)[:, None] == np.asarray(map_labels)[None, :]
    d = np.where(same[None], d, np.inf)
    j = np.argmin(d, axis=2)
    return np.take_along_axis(d, j[..., None], axis=2)[..., 0], j


def ransac_pose(observations: LandmarkMap, landmark_map: LandmarkMap,
                cfg: RansacConfig | None = None) -> RansacPoseResult:
    """Fixed-budget RANSAC over random observation triplets and label-consistent assignments.

    ``cfg.inlier_threshold`` is in scene units here.
    """
    cfg = cfg or RansacConfig(inlier_threshold=0.1)
    n = len(observations)
    if n < 3:
        raise DegenerateConfiguration("need at least 3 observations")
    rng = np.random.default_rng(cfg.seed)
    obs_pos = observations.positions
    obs_lab = observations.point_labels
    map_pos = landmark_map.positions
    map_lab = landmark_map.point_labels
    pools = {c: np.array([j for j, m in enumerate(map_lab) if m == c]) for c in set(map_lab)}

    tri = draw_subsets(rng, n, 3, cfg.iterations)
    picks = rng.random((cfg.iterations, 3))
    assign = np.full((cfg.iterations, 3), -1)
    for b in range(cfg.iterations):
        for k in range(3):
            pool = pools.get(obs_lab[tri[b, k]])
            if pool is not None and len(pool):
                assign[b, k] = pool[int(picks[b, k] * len(pool))]
    ok = (assign >= 0).all(axis=1)
    ok &= (assign[:, 0] != assign[:, 1]) & (assign[:, 0] != assign[:, 2]) & (assign[:, 1] != assign[:, 2])
    safe = np.where(assign >= 0, assign, 0)
    R, t, ok_align = _svd_align_batch(obs_pos[tri], map_pos[safe])
    ok &= ok_align
    if not ok.any():
        raise NoValidHypothesis(f"all {cfg.iterations} draws were degenerate")

    res, _ = landmark_residuals(R, t, obs_pos, obs_lab, map_pos, map_lab)
    inl = res <= cfg.inlier_threshold
    counts = np.where(ok, inl.sum(axis=1), 0)
    mean_err = np.where(ok, np.where(inl, res, 0.0).sum(axis=1) / np.maximum(counts, 1), np.inf)
    best = _select_best(counts, mean_err, ok)

    pose = Pose(R[best], t[best])
    res_b, j_b = landmark_residuals(R[best:best + 1], t[best:best + 1], obs_pos, obs_lab, map_pos, map_lab)
    inliers = np.flatnonzero(res_b[0] <= cfg.inlier_threshold)
    if len(inliers) >= 3:
        Rr, tr, okr = _svd_align_batch(obs_pos[inliers][None], map_pos[j_b[0, inliers]][None])
        if okr[0]:
            pose = Pose(Rr[0], tr[0])
    res_f, _ = landmark_residuals(pose.R[None], pose.t[None], obs_pos, obs_lab, map_pos, map_lab)
    inliers = np.flatnonzero(res_f[0] <= cfg.inlier_threshold)
    return RansacPoseResult(pose, [int(i) for i in inliers], cfg.iterations, res_f[0])
