"""Minimal solvers that turn feature subsets into candidate transforms."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateConfiguration,
    InsufficientValidCandidates,
    TooFewObservations,
)
from .lie import H33, Homography, Pose, det3, inv3

RELATIVE_SV_TOL = 1e-9


# ---------------------------------------------------------------------------
# data types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Landmark:
    position: np.ndarray
    label: str

    def __post_init__(self):
        p = np.array(self.position, dtype=float).reshape(3)
        if not np.all(np.isfinite(p)):
            raise ValueError("landmark coordinates must be finite")
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "label", str(self.label))


@dataclass
class LandmarkMap:
    """Labeled 3D points in one frame (the global map, or robot-frame observations)."""

    landmarks: list[Landmark]
    labels: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.landmarks = [lm if isinstance(lm, Landmark) else Landmark(*lm) for lm in self.landmarks]
        if not self.labels:
            self.labels = sorted({lm.label for lm in self.landmarks})
        unknown = {lm.label for lm in self.landmarks} - set(self.labels)
        if unknown:
            raise ValueError(f"labels {sorted(unknown)} are not in the declared alphabet")

    @classmethod
    def from_arrays(cls, positions, labels, alphabet: Sequence[str] | None = None) -> "LandmarkMap":
        return cls([Landmark(p, c) for p, c in zip(np.asarray(positions, float), labels)],
                   list(alphabet) if alphabet is not None else [])

    @property
    def positions(self) -> np.ndarray:
        if not self.landmarks:
            return np.zeros((0, 3))
        return np.stack([lm.position for lm in self.landmarks])

    @property
    def point_labels(self) -> list[str]:
        return [lm.label for lm in self.landmarks]

    def validate_as_map(self) -> None:
        if len(self.landmarks) < 3:
            raise ValueError("a landmark map needs at least 3 landmarks")
        P = self.positions
        d = np.linalg.norm(P[:, None] - P[None], axis=-1)
        d[np.diag_indices(len(P))] = np.inf
        if d.min() < 1e-9:
            raise ValueError("two map landmarks coincide (closer than 1e-9)")

    def __len__(self):
        return len(self.landmarks)

    def __getitem__(self, i):
        return self.landmarks[i]

    def to_json(self) -> dict:
        return {"labels": list(self.labels),
                "landmarks": [{"p": lm.position.tolist(), "c": lm.label} for lm in self.landmarks]}

    @classmethod
    def from_json(cls, obj: dict) -> "LandmarkMap":
        return cls([Landmark(d["p"], d["c"]) for d in obj["landmarks"]], list(obj.get("labels", [])))


@dataclass(eq=False)
class Matches:
    """Point correspondences ``p[i] -> q[i]`` between a source and a target image."""

    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        self.p = np.array(self.p, dtype=float).reshape(-1, 2)
        self.q = np.array(self.q, dtype=float).reshape(-1, 2)
        if len(self.p) != len(self.q):
            raise ValueError("p and q must have the same number of points")
        if not (np.all(np.isfinite(self.p)) and np.all(np.isfinite(self.q))):
            raise ValueError("match coordinates must be finite")

    def __len__(self):
        return len(self.p)

    def __getitem__(self, idx) -> "Matches":
        idx = np.atleast_1d(np.asarray(idx))
        return Matches(self.p[idx], self.q[idx])

    def to_json(self) -> dict:
        return {"matches": [{"p": a.tolist(), "q": b.tolist()} for a, b in zip(self.p, self.q)]}

    @classmethod
    def from_json(cls, obj: dict) -> "Matches":
        items = obj["matches"]
        if not items:
            return cls(np.zeros((0, 2)), np.zeros((0, 2)))
        return cls([m["p"] for m in items], [m["q"] for m in items])


@dataclass(eq=False)
class PoseCandidate:
    pose: Pose
    source_indices: tuple[tuple[int, int, int], tuple[int, int, int]]
    residual: float


@dataclass(eq=False)
class CandidateSet:
    """Hypothesis transforms together with the minimal subset that produced each."""

    items: list
    sources: list[tuple[int, ...]]
    attempts: int = 0

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __getitem__(self, i):
        return self.items[i]


# ---------------------------------------------------------------------------
# 3D point alignment
# ---------------------------------------------------------------------------

def _svd_align_batch(src, dst):
    """Kabsch/Arun alignment on stacks ``(B, m, 3)``; returns ``(R, t, ok)``."""
    cs = src.mean(axis=1)
    cd = dst.mean(axis=1)
    S = src - cs[:, None]
    D = dst - cd[:, None]
    Hc = np.einsum("bmi,bmj->bij", S, D)
    U, sv, Vt = np.linalg.svd(Hc)
    V = np.swapaxes(Vt, -1, -2)
    Ut = np.swapaxes(U, -1, -2)
    sign = np.sign(det3(V @ Ut))
    sign[sign == 0] = 1.0
    corr = np.ones((len(src), 3))
    corr[:, 2] = sign
    R = (V * corr[:, None, :]) @ Ut
    t = cd - np.einsum("bij,bj->bi", R, cs)
    scale = np.maximum(sv[:, 0], 1e-300)
    # rank <= 1 cross-covariance: rotation about the common line is unobservable
    ok = (sv[:, 1] / scale >= RELATIVE_SV_TOL) & (sv[:, 0] > 1e-300)
    return R, t, ok


def svd_align(src, dst) -> Pose:
    """Least-squares rigid transform ``T`` with ``T @ src[i] ~ dst[i]``.

    Cross-covariance ``H = sum src'_i dst'_i^T = U S V^T`` of the centered
    point sets gives ``R = V diag(1, 1, det(V U^T)) U^T``; the determinant
    correction excludes reflections.
    """
    src = np.asarray(src, dtype=float).reshape(-1, 3)
    dst = np.asarray(dst, dtype=float).reshape(-1, 3)
    if len(src) != len(dst):
        raise ValueError("src and dst must have the same number of points")
    if len(src) < 3:
        raise DegenerateConfiguration("svd_align needs at least 3 point pairs")
    R, t, ok = _svd_align_batch(src[None], dst[None])
    if not ok[0]:
        raise DegenerateConfiguration("points are collinear; rotation about the line is unobservable")
    return Pose(R[0], t[0])


def alignment_rms(T: Pose, src, dst) -> float:
    diff = T.apply(np.asarray(src, float)) - np.asarray(dst, float)
    return float(np.sqrt(np.mean(np.sum(diff * diff, axis=-1))))


def _as_landmark_map(obj) -> LandmarkMap:
    if isinstance(obj, LandmarkMap):
        return obj
    return LandmarkMap(list(obj))


def _assignments_for(labels_obs, by_label, triplet):
    """Ordered, distinct, class-consistent map index triples for an observation triplet."""
    pools = [by_label.get(labels_obs[i], ()) for i in triplet]
    for combo in itertools.product(*pools):
        if combo[0] != combo[1] and combo[0] != combo[2] and combo[1] != combo[2]:
            yield combo


def count_class_consistent(observations, landmark_map) -> int:
    """Number of (observation triplet, ordered map triplet) pairs with matching labels."""
    obs = _as_landmark_map(observations)
    mp = _as_landmark_map(landmark_map)
    by_label: dict[str, list[int]] = {}
    for j, lm in enumerate(mp.landmarks):
        by_label.setdefault(lm.label, []).append(j)
    labels = obs.point_labels
    total = 0
    for tri in itertools.combinations(range(len(obs)), 3):
        total += sum(1 for _ in _assignments_for(labels, by_label, tri))
    return total


def _canonical_order(obs: LandmarkMap) -> list[int]:
    # enumeration must not depend on input order
    keys = [(lm.label, *lm.position.tolist()) for lm in obs.landmarks]
    return sorted(range(len(keys)), key=lambda i: keys[i])


def enumerate_pose_candidates(observations, landmark_map, max_candidates: int | None = None,
                              seed: int = 0, max_residual: float | None = None) -> list[PoseCandidate]:
    """Candidate robot poses from every class-consistent triplet assignment.

    For each observation triplet and each ordered assignment to distinct map
    landmarks with equal labels, align the observed triplet (robot frame) onto
    the map triplet. Degenerate (collinear) triplets are skipped. When the
    total would exceed ``max_candidates``, whole observation triplets are
    subsampled uniformly at random (seeded) until the budget is filled.
    With ``max_residual`` set, candidates whose alignment RMS exceeds it are
    dropped.
    """
    obs = _as_landmark_map(observations)
    mp = _as_landmark_map(landmark_map)
    if len(obs) < 3:
        raise TooFewObservations(f"need at least 3 observations, got {len(obs)}")

    by_label: dict[str, list[int]] = {}
    for j, lm in enumerate(mp.landmarks):
        by_label.setdefault(lm.label, []).append(j)
    labels = obs.point_labels
    order = _canonical_order(obs)

    per_triplet = []
    for tri in itertools.combinations(order, 3):
        assigns = list(_assignments_for(labels, by_label, tri))
        if assigns:
            per_triplet.append((tri, assigns))

    total = sum(len(a) for _, a in per_triplet)
    if max_candidates is not None and total > max_candidates:
        rng = np.random.default_rng(seed)
        picked, budget = [], 0
        for k in rng.permutation(len(per_triplet)):
            n = len(per_triplet[k][1])
            if budget + n > max_candidates:
                continue
            picked.append(k)
            budget += n
        per_triplet = [per_triplet[k] for k in sorted(picked)]

    if not per_triplet:
        return []
    obs_pos = obs.positions
    map_pos = mp.positions
    obs_idx = np.array([tri for tri, assigns in per_triplet for _ in assigns])
    map_idx = np.array([a for _, assigns in per_triplet for a in assigns])
    src = obs_pos[obs_idx]
    dst = map_pos[map_idx]
    R, t, ok = _svd_align_batch(src, dst)
    diff = np.einsum("bij,bmj->bmi", R, src) + t[:, None, :] - dst
    rms = np.sqrt(np.mean(np.sum(diff * diff, axis=2), axis=1))

    if max_residual is not None:
        ok &= rms <= max_residual
    out = []
    for k in np.flatnonzero(ok):
        out.append(PoseCandidate(
            pose=Pose(R[k], t[k]),
            source_indices=(tuple(int(i) for i in obs_idx[k]), tuple(int(j) for j in map_idx[k])),
            residual=float(rms[k]),
        ))
    return out


# ---------------------------------------------------------------------------
# homographies
# ---------------------------------------------------------------------------

def _hartley(P):
    """Similarity moving the centroid to 0 and the mean distance to sqrt(2). Stacks ``(B, m, 2)``."""
    c = P.mean(axis=1)
    d = np.mean(np.linalg.norm(P - c[:, None], axis=2), axis=1)
    ok = d > 1e-12
    s = np.sqrt(2.0) / np.where(ok, d, 1.0)
    T = np.zeros((len(P), 3, 3))
    T[:, 0, 0] = s
    T[:, 1, 1] = s
    T[:, 0, 2] = -s * c[:, 0]
    T[:, 1, 2] = -s * c[:, 1]
    T[:, 2, 2] = 1.0
    Pn = (P - c[:, None]) * s[:, None, None]
    return Pn, T, ok


def dlt_batch(src, dst):
    """Normalized DLT on stacks of correspondences ``(B, m, 2)``.

    Returns ``(H, ok)`` with ``H`` scaled to ``H33 = 1`` where ``ok``.
    """
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    B, m, _ = src.shape
    ps, Ts, ok_s = _hartley(src)
    pd, Td, ok_d = _hartley(dst)
    x, y = ps[..., 0], ps[..., 1]
    u, v = pd[..., 0], pd[..., 1]
    one, zero = np.ones_like(x), np.zeros_like(x)
    r1 = np.stack([x, y, one, zero, zero, zero, -u * x, -u * y, -u], axis=-1)
    r2 = np.stack([zero, zero, zero, x, y, one, -v * x, -v * y, -v], axis=-1)
    A = np.stack([r1, r2], axis=2).reshape(B, 2 * m, 9)
    _, sv, Vt = np.linalg.svd(A, full_matrices=True)
    sv9 = np.zeros((B, 9))
    sv9[:, :sv.shape[1]] = sv
    ok = ok_s & ok_d & (sv9[:, 7] >= RELATIVE_SV_TOL * np.maximum(sv9[:, 0], 1e-300))
    Hn = Vt[:, -1, :].reshape(B, 3, 3)
    H = inv3(Td) @ Hn @ Ts
    h33 = H[:, 2, 2]
    scale = np.sqrt(np.sum(H * H, axis=(1, 2)))
    ok &= np.abs(h33) > 1e-9 * scale
    H = H / np.where(ok, h33, 1.0)[:, None, None]
    ok &= np.abs(det3(H)) > 1e-12
    ok &= np.isfinite(H).all(axis=(1, 2))
    return H, ok


def dlt_homography(matches: Matches) -> Homography:
    """Homography mapping ``p -> q`` from at least 4 correspondences (Hartley-normalized DLT)."""
    if len(matches) < 4:
        raise DegenerateConfiguration("DLT needs at least 4 matches")
    H, ok = dlt_batch(matches.p[None], matches.q[None])
    if not ok[0]:
        raise DegenerateConfiguration("correspondences do not determine a unique homography")
    return Homography(H[0], H33)


def draw_subsets(rng: np.random.Generator, n_items: int, k: int, count: int) -> np.ndarray:
    """``count`` uniform draws of ``k`` distinct indices from ``range(n_items)``."""
    if count <= 0:
        return np.zeros((0, k), dtype=int)
    keys = rng.random((count, n_items))
    return np.argsort(keys, axis=1, kind="stable")[:, :k]


def sample_homography_candidates(matches: Matches, n: int, seed: int = 0) -> CandidateSet:
    """Up to ``n`` DLT homographies from random 4-subsets of the matches.

    Degenerate draws are discarded and redrawn, with at most ``20 n`` draws in
    total. Raises :class:`InsufficientValidCandidates` if fewer than
    ``max(10, n / 10)`` candidates survive.
    """
    if len(matches) < 4:
        raise DegenerateConfiguration("need at least 4 matches")
    rng = np.random.default_rng(seed)
    items: list[Homography] = []
    sources: list[tuple[int, ...]] = []
    attempts = 0
    budget = 20 * n
    while len(items) < n and attempts < budget:
        want = min(n - len(items), budget - attempts)
        idx = draw_subsets(rng, len(matches), 4, want)
        attempts += want
        H, ok = dlt_batch(matches.p[idx], matches.q[idx])
        for k in np.flatnonzero(ok):
            items.append(Homography(H[k], H33))
            sources.append(tuple(int(i) for i in idx[k]))
    if len(items) < max(10, n / 10):
        raise InsufficientValidCandidates(
            f"only {len(items)} valid candidates out of {attempts} draws")
    return CandidateSet(items, sources, attempts)

