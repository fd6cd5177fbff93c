"""Cluster-center averaging on SE(3) and on unit-determinant homographies."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateRotationMean, NonConvergence
from .lie import (
    DET1,
    Homography,
    Pose,
    gl3_exp,
    gl3_log_batch,
    inv3,
    normalize_homography_array,
    relative_arrays,
    se3_exp,
    se3_log_arrays,
    stack_poses,
)
from .metrics import DEFAULT_LAMBDA, HomographyLieMetric, LieLogMetric

SE3_SCHEMES = ("karcher", "logeuclidean", "split", "medoid")
HOMOGRAPHY_SCHEMES = ("liemean", "liemedian", "medoid")


@dataclass
class AveragingConfig:
    scheme: str = "karcher"
    max_iter: int = 100
    tol: float = 1e-10

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.scheme not in SE3_SCHEMES + HOMOGRAPHY_SCHEMES:
            raise ValueError(f"unknown averaging scheme {self.scheme!r}")


@dataclass
class AveragingInfo:
    """Diagnostics returned with ``full_output=True``."""

    iterations: int = 0
    converged: bool = True
    excluded: int = 0
    objective: list[float] = field(default_factory=list)


def _non_convergence(name, max_iter):
    warnings.warn(f"{name} did not converge in {max_iter} iterations", RuntimeWarning, stacklevel=3)


# ---------------------------------------------------------------------------
# SE(3)
# ---------------------------------------------------------------------------

def _poses(poses) -> list[Pose]:
    out = [p if isinstance(p, Pose) else p.pose for p in poses]
    if not out:
        raise ValueError("cannot average an empty set")
    return out


def medoid_pose_index(poses: Sequence[Pose], lam: float = DEFAULT_LAMBDA) -> int:
    if len(poses) == 1:
        return 0
    D, _ = LieLogMetric(lam).pairwise(list(poses))
    return int(np.argmin(D.sum(axis=1)))


def karcher_mean_se3(poses, cfg: AveragingConfig | None = None, full_output: bool = False):
    """Intrinsic (Frechet) mean by fixed-point iteration in the tangent space.

    Starts at the medoid and repeats ``mu <- mu exp(mean_i log(mu^-1 T_i))``
    until the mean twist is below ``cfg.tol``. If ``max_iter`` is exhausted
    the iterate with the smallest mean twist is returned and
    ``info.converged`` is False.
    """
    cfg = cfg or AveragingConfig()
    poses = _poses(poses)
    R, t = stack_poses(poses)
    mu = poses[medoid_pose_index(poses)]
    best, best_norm = mu, np.inf
    info = AveragingInfo(converged=False)
    for it in range(1, cfg.max_iter + 1):
        Rr, tr = relative_arrays(mu.R, mu.t, R, t)
        delta = se3_log_arrays(Rr, tr).mean(axis=0)
        nrm = float(np.linalg.norm(delta))
        info.iterations = it
        info.objective.append(nrm)
        if nrm < best_norm:
            best, best_norm = mu, nrm
        if nrm < cfg.tol:
            info.converged = True
            break
        mu = mu.compose(se3_exp(delta))
    if not info.converged:
        _non_convergence("karcher_mean_se3", cfg.max_iter)
    return (best, info) if full_output else best


def log_euclidean_mean_se3(poses) -> Pose:
    """``exp`` of the arithmetic mean of the twists ``log(T_i)``; one pass."""
    R, t = stack_poses(_poses(poses))
    xi = se3_log_arrays(R, t).mean(axis=0)
    return se3_exp(xi)


def project_to_so3(M) -> np.ndarray:
    U, s, Vt = np.linalg.svd(M)
    d = np.sign(np.linalg.det(U @ Vt)) or 1.0
    return U @ np.diag([1.0, 1.0, d]) @ Vt


def split_mean_se3(poses) -> Pose:
    """Arithmetic mean translation and chordal (SVD-projected) mean rotation."""
    R, t = stack_poses(_poses(poses))
    M = R.mean(axis=0)
    s = np.linalg.svd(M, compute_uv=False)
    if s[1] < 1e-9:
        raise DegenerateRotationMean("rotation mean is rank-deficient (antipodal inputs?)")
    return Pose(project_to_so3(M), t.mean(axis=0))


def average_poses(poses, cfg: AveragingConfig | None = None, lam: float = DEFAULT_LAMBDA,
                  full_output: bool = False):
    """Dispatch on ``cfg.scheme`` (``karcher``, ``logeuclidean``, ``split``, ``medoid``)."""
    cfg = cfg or AveragingConfig()
    poses = _poses(poses)
    info = AveragingInfo()
    if cfg.scheme == "karcher":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            pose, info = karcher_mean_se3(poses, cfg, full_output=True)
    elif cfg.scheme == "logeuclidean":
        pose = log_euclidean_mean_se3(poses)
    elif cfg.scheme == "split":
        pose = split_mean_se3(poses)
    elif cfg.scheme == "medoid":
        pose = poses[medoid_pose_index(poses, lam)]
    else:
        raise ValueError(f"scheme {cfg.scheme!r} does not apply to poses")
    return (pose, info) if full_output else pose


# ---------------------------------------------------------------------------
# homographies
# ---------------------------------------------------------------------------

def _det1(Hs) -> np.ndarray:
    H = np.stack([h.H if isinstance(h, Homography) else np.asarray(h, float) for h in Hs])
    if len(H) == 0:
        raise ValueError("cannot average an empty set")
    Hn, ok = normalize_homography_array(H, DET1)
    if not ok.all():
        raise ValueError("cannot average singular homographies")
    return Hn


def _renorm(H):
    Hn, _ = normalize_homography_array(H, DET1)
    return Hn


def _medoid_h(H) -> int:
    if len(H) == 1:
        return 0
    D, _ = HomographyLieMetric().pairwise(list(H))
    return int(np.argmin(D.sum(axis=1)))


def _tangent(mu, H):
    return gl3_log_batch(inv3(mu)[None] @ H)


def lie_mean_homography(Hs, cfg: AveragingConfig | None = None, full_output: bool = False):
    """Karcher-style intrinsic mean on SL(3), initialized at the medoid.

    Members whose relative logarithm leaves the principal domain at the
    initializer are excluded (counted in ``info.excluded``).
    """
    cfg = cfg or AveragingConfig(scheme="liemean")
    H = _det1(Hs)
    mu = H[_medoid_h(H)]
    _, ok = _tangent(mu, H)
    info = AveragingInfo(converged=False, excluded=int(np.count_nonzero(~ok)))
    H = H[ok]
    best, best_norm = mu, np.inf
    for it in range(1, cfg.max_iter + 1):
        L, ok = _tangent(mu, H)
        delta = L[ok].mean(axis=0)
        nrm = float(np.linalg.norm(delta))
        info.iterations = it
        info.objective.append(nrm)
        if nrm < best_norm:
            best, best_norm = mu, nrm
        if nrm < cfg.tol:
            info.converged = True
            break
        mu = _renorm(mu @ gl3_exp(delta))
    if not info.converged:
        _non_convergence("lie_mean_homography", cfg.max_iter)
    out = Homography(best, DET1)
    return (out, info) if full_output else out


def lie_median_homography(Hs, max_iter: int = 100, tol: float = 1e-10, full_output: bool = False):
    """Geometric median under ``d(H, H_i) = |log(H^-1 H_i)|_F`` (Riemannian Weiszfeld).

    The tangent space is re-anchored at every iterate. Each Weiszfeld step is
    backtracked (halved) until the summed distance does not increase, so the
    objective sequence in ``info.objective`` is non-increasing.
    """
    H = _det1(Hs)
    mu = H[_medoid_h(H)]
    L, ok = _tangent(mu, H)
    info = AveragingInfo(converged=False, excluded=int(np.count_nonzero(~ok)))
    H, L = H[ok], L[ok]

    def objective(L):
        return float(np.sum(np.sqrt(np.sum(L * L, axis=(1, 2)))))

    obj = objective(L)
    info.objective.append(obj)
    for it in range(1, max_iter + 1):
        info.iterations = it
        d = np.sqrt(np.sum(L * L, axis=(1, 2)))
        w = 1.0 / np.maximum(d, 1e-12)
        step = np.tensordot(w, L, axes=1) / w.sum()
        if np.linalg.norm(step) < tol:
            info.converged = True
            break
        accepted = False
        for _ in range(40):
            cand = _renorm(mu @ gl3_exp(step))
            Lc, okc = _tangent(cand, H)
            if okc.all():
                oc = objective(Lc)
                if oc <= obj:
                    accepted = True
                    break
            step = 0.5 * step
            if np.linalg.norm(step) < tol:
                break
        if not accepted:
            # no descent left at working precision
            info.converged = True
            break
        mu, L, obj = cand, Lc, oc
        info.objective.append(obj)
    if not info.converged:
        _non_convergence("lie_median_homography", max_iter)
    out = Homography(mu, DET1)
    return (out, info) if full_output else out


def average_homographies(Hs, scheme: str = "medoid", cfg: AveragingConfig | None = None,
                         full_output: bool = False):
    cfg = cfg or AveragingConfig(scheme=scheme)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        if scheme == "liemean":
            out, info = lie_mean_homography(Hs, cfg, full_output=True)
        elif scheme == "liemedian":
            out, info = lie_median_homography(Hs, cfg.max_iter, cfg.tol, full_output=True)
        elif scheme == "medoid":
            H = _det1(Hs)
            out, info = Homography(H[_medoid_h(H)], DET1), AveragingInfo()
        else:
            raise ValueError(f"scheme {scheme!r} does not apply to homographies")
    return (out, info) if full_output else out


__all__ = [
    "AveragingConfig",
    "AveragingInfo",
    "NonConvergence",
    "karcher_mean_se3",
    "log_euclidean_mean_se3",
    "split_mean_se3",
    "average_poses",
    "lie_mean_homography",
    "lie_median_homography",
    "average_homographies",
    "project_to_so3",
    "medoid_pose_index",
]
