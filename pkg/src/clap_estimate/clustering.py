"""Pairwise-distance clustering of candidate transforms.

The center during trimming is always the medoid: it needs no group
structure and is cheap once the distance matrix exists. Means are computed
afterwards by :mod:`clap_estimate.averaging`. Ties are broken by the lowest
candidate index everywhere, so seeded pipelines are bit-reproducible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EmptyAfterFilter
from .lie import Pose, relative_arrays, so3_log, stack_poses
from .metrics import DEFAULT_LAMBDA, Metric, get_metric

GLOBAL = "global"
LOCAL = "local"


@dataclass
class ClusterConfig:
    metric: str = "lielog"
    trim_fraction: float = 0.2
    rounds: int = 5
    mad_k: float = 3.0
    mode: str = GLOBAL
    reference: Pose | None = None
    tol_t: float = 0.5
    tol_r: float = 0.35
    lam: float = DEFAULT_LAMBDA
    points: np.ndarray | None = None

    def __post_init__(self):
        if not 0.0 <= self.trim_fraction < 1.0:
            raise ValueError("trim_fraction must lie in [0, 1)")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.mad_k < 0:
            raise ValueError("mad_k must be >= 0")
        if self.mode not in (GLOBAL, LOCAL):
            raise ValueError(f"mode must be {GLOBAL!r} or {LOCAL!r}")
        if self.mode == LOCAL and (self.tol_t <= 0 or self.tol_r <= 0):
            raise ValueError("local mode needs positive tolerances")

    def get_metric(self) -> Metric:
        return get_metric(self.metric, lam=self.lam, points=self.points)


@dataclass
class ClusterResult:
    center_index: int
    survivors: list[int]
    per_round_counts: list[int] = field(default_factory=list)
    fallback_pairs: int = 0


def _resolve(metric) -> Metric:
    return get_metric(metric) if isinstance(metric, str) else metric


def pairwise_distances(candidates: Sequence, metric, return_fallbacks: bool = False):
    """Symmetric distance matrix with zero diagonal.

    For the ``hlie`` metric, pairs outside the principal-log domain use the
    Frobenius distance instead; pass ``return_fallbacks=True`` to also get
    their count.
    """
    D, fallbacks = _resolve(metric).pairwise(list(candidates))
    return (D, fallbacks) if return_fallbacks else D


def medoid_from_matrix(D: np.ndarray) -> int:
    return int(np.argmin(D.sum(axis=1)))


def medoid(candidates: Sequence, metric) -> int:
    """Index of the candidate minimizing the summed distance to all others."""
    return medoid_from_matrix(pairwise_distances(candidates, metric))


def local_filter(candidates: Sequence, reference: Pose, tol_t: float, tol_r: float,
                 lam: float = DEFAULT_LAMBDA) -> list[int]:
    """Candidates within ``tol_t`` and ``tol_r`` of ``reference``, closest first.

    Ranking uses ``e_t + lam * e_r``. Raises :class:`EmptyAfterFilter` when
    nothing survives, which pipelines treat as the signal to cluster globally.
    """
    if tol_t <= 0 or tol_r <= 0:
        raise ValueError("tolerances must be positive")
    poses = [c if isinstance(c, Pose) else c.pose for c in candidates]
    if not poses:
        raise EmptyAfterFilter("no candidates to filter")
    R, t = stack_poses(poses)
    Rr, tr = relative_arrays(reference.R, reference.t, R, t)
    et = np.linalg.norm(tr, axis=1)
    er = np.linalg.norm(so3_log(Rr), axis=1)
    keep = np.flatnonzero((et <= tol_t) & (er <= tol_r))
    if keep.size == 0:
        raise EmptyAfterFilter("no candidate within the local tolerances")
    score = et[keep] + lam * er[keep]
    return [int(i) for i in keep[np.lexsort((keep, score))]]


def trim_count(n: int, fraction: float) -> int:
    """Survivors after one trimming round: ``ceil((1 - fraction) n)``, floor of 2."""
    drop = math.floor(fraction * n + 1e-9)
    return max(min(n, 2), n - drop)


def trim_iterate(candidates: Sequence, cfg: ClusterConfig, distances: np.ndarray | None = None,
                 fallback_pairs: int = 0) -> ClusterResult:
    """Iterative medoid trimming.

    Each round finds the medoid of the current survivors and keeps the
    ``ceil((1 - trim_fraction) * count)`` closest to it (never fewer than 2).
    The returned center is the medoid of the final survivors; ``center_index``
    and ``survivors`` index into ``candidates``.
    """
    n = len(candidates)
    if n == 0:
        raise ValueError("trim_iterate needs at least one candidate")
    if distances is None:
        distances, fallback_pairs = pairwise_distances(candidates, cfg.get_metric(), return_fallbacks=True)
    D = distances
    surv = np.arange(n)
    counts = []
    for _ in range(cfg.rounds):
        sub = D[np.ix_(surv, surv)]
        c = surv[medoid_from_matrix(sub)]
        keep = trim_count(len(surv), cfg.trim_fraction)
        d = D[c, surv]
        order = np.lexsort((surv, d))
        surv = np.sort(surv[order[:keep]])
        counts.append(int(len(surv)))
    center = int(surv[medoid_from_matrix(D[np.ix_(surv, surv)])])
    return ClusterResult(center, [int(i) for i in surv], counts, int(fallback_pairs))


def mad_filter(candidates: Sequence, center, metric, k: float) -> list[int]:
    """Keep candidates whose distance to ``center`` is at most ``median + k * MAD``."""
    if k <= 0:
        raise ValueError("k must be positive")
    d, _ = _resolve(metric).to_center(list(candidates), center)
    return mad_keep(d, k)


def mad_keep(d: np.ndarray, k: float) -> list[int]:
    d = np.asarray(d, dtype=float)
    m = float(np.median(d))
    mad = float(np.median(np.abs(d - m)))
    if mad < 1e-12:
        keep = d <= m + 1e-12
    else:
        keep = d <= m + k * mad
    return [int(i) for i in np.flatnonzero(keep)]
