"""Distances between candidate transforms.

Five metrics are provided, addressable by name:

``rte``
    relative transform error, scalarized as ``e_t + lambda * e_r``
``lielog``
    ``sqrt(|rho|^2 + lambda^2 |phi|^2)`` of the SE(3) error twist
``pointset``
    RMS displacement of reference points under the two poses
``hlie``
    ``|log(H1^-1 H2)|_F`` on unit-determinant homographies
``hfro``
    Frobenius distance of unit-determinant homographies, sign-aligned

Each named metric is a :class:`Metric` object: callable on a pair, and with
vectorized ``pairwise`` / ``to_center`` methods used by the clustering code.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateHomography, EmptyPointSet, LogDomainError
from .lie import (
    DET1,
    Homography,
    Pose,
    gl3_log,
    gl3_log_batch,
    inv3,
    normalize_homography,
    normalize_homography_array,
    relative_arrays,
    se3_log_arrays,
    so3_log,
    stack_poses,
)

DEFAULT_LAMBDA = 1.0
_CHUNK = 1 << 17


@dataclass
class Se3MetricConfig:
    lam: float = DEFAULT_LAMBDA
    reference_points: np.ndarray | None = None

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.reference_points is not None:
            self.reference_points = np.asarray(self.reference_points, dtype=float).reshape(-1, 3)


class HomographyMetricKind(enum.Enum):
    LieAlgebra = "hlie"
    Frobenius = "hfro"


# ---------------------------------------------------------------------------
# scalar metrics
# ---------------------------------------------------------------------------

def relative_transform_error(T1: Pose, T2: Pose) -> tuple[float, float]:
    """Translation and rotation magnitude of ``T1^-1 T2``."""
    R, t = relative_arrays(T1.R, T1.t, T2.R, T2.t)
    return float(np.linalg.norm(t)), float(np.linalg.norm(so3_log(R)))


def lie_log_distance(T1: Pose, T2: Pose, cfg: Se3MetricConfig | float | None = None) -> float:
    lam = _lam(cfg)
    R, t = relative_arrays(T1.R, T1.t, T2.R, T2.t)
    xi = se3_log_arrays(R, t)
    return float(np.sqrt(xi[:3] @ xi[:3] + lam * lam * (xi[3:] @ xi[3:])))


def point_set_distance(T1: Pose, T2: Pose, points) -> float:
    """RMS over ``p`` in ``points`` of ``|T1 p - T2 p|``."""
    P = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(P) == 0:
        raise EmptyPointSet("point_set_distance needs at least one reference point")
    diff = T1.apply(P) - T2.apply(P)
    return float(np.sqrt(np.mean(np.sum(diff * diff, axis=1))))


def homography_lie_distance(H1, H2) -> float:
    """``|log(H1^-1 H2)|_F`` after scaling both to unit determinant.

    Raises :class:`LogDomainError` when the relative transform has no real
    principal logarithm; callers decide on a fallback.
    """
    A = normalize_homography(H1, DET1).H
    B = normalize_homography(H2, DET1).H
    return float(np.linalg.norm(gl3_log(inv3(A) @ B)))


def homography_frobenius_distance(H1, H2) -> float:
    A = normalize_homography(H1, DET1).H
    B = normalize_homography(H2, DET1).H
    return float(min(np.linalg.norm(A - B), np.linalg.norm(A + B)))


def _lam(cfg) -> float:
    if cfg is None:
        return DEFAULT_LAMBDA
    if isinstance(cfg, Se3MetricConfig):
        return cfg.lam
    return float(cfg)


# ---------------------------------------------------------------------------
# vectorized metric objects
# ---------------------------------------------------------------------------

def _upper_pairs(n):
    return np.triu_indices(n, k=1)


def _fill_symmetric(n, iu, ju, vals):
    D = np.zeros((n, n))
    D[iu, ju] = vals
    D[ju, iu] = vals
    return D


class Metric:
    """Base class. Subclasses implement ``_prepare`` and ``_between``.

    ``_prepare`` turns a candidate list into arrays once; ``_between`` maps two
    index arrays to distances. Pairwise evaluation only visits ``i < j`` since
    all metrics here are exactly symmetric.
    """

    name = ""
    domain = "pose"

    def __call__(self, a, b) -> float:
        raise NotImplementedError

    def _prepare(self, items):
        raise NotImplementedError

    def _between(self, data, i, j):
        """Return ``(distances, n_fallback)`` for index pairs ``(i, j)``."""
        raise NotImplementedError

    def pairwise(self, items) -> tuple[np.ndarray, int]:
        n = len(items)
        if n == 0:
            return np.zeros((0, 0)), 0
        data = self._prepare(items)
        iu, ju = _upper_pairs(n)
        vals = np.empty(len(iu))
        fallbacks = 0
        for s in range(0, len(iu), _CHUNK):
            d, f = self._between(data, iu[s:s + _CHUNK], ju[s:s + _CHUNK])
            vals[s:s + _CHUNK] = d
            fallbacks += f
        return _fill_symmetric(n, iu, ju, vals), fallbacks

    def to_center(self, items, center) -> tuple[np.ndarray, int]:
        """Distances from ``center`` to every item."""
        data = self._prepare([center] + list(items))
        j = np.arange(1, len(items) + 1)
        if len(j) == 0:
            return np.zeros(0), 0
        return self._between(data, np.zeros_like(j), j)

    def __repr__(self):
        return f"{type(self).__name__}()"


class LieLogMetric(Metric):
    name = "lielog"

    def __init__(self, lam: float = DEFAULT_LAMBDA):
        if lam < 0:
            raise ValueError("lambda must be nonnegative")
        self.lam = float(lam)

    def __call__(self, a, b):
        return lie_log_distance(_pose(a), _pose(b), self.lam)

    def _prepare(self, items):
        return stack_poses([_pose(c) for c in items])

    def _between(self, data, i, j):
        R, t = data
        Rr, tr = relative_arrays(R[i], t[i], R[j], t[j])
        xi = se3_log_arrays(Rr, tr)
        d = np.sqrt(np.sum(xi[:, :3] ** 2, axis=1) + self.lam ** 2 * np.sum(xi[:, 3:] ** 2, axis=1))
        return d, 0

    def __repr__(self):
        return f"LieLogMetric(lam={self.lam})"


class RelativeTransformMetric(Metric):
    """Scalarized relative transform error ``e_t + lambda * e_r``."""

    name = "rte"

    def __init__(self, lam: float = DEFAULT_LAMBDA):
        self.lam = float(lam)

    def __call__(self, a, b):
        et, er = relative_transform_error(_pose(a), _pose(b))
        return et + self.lam * er

    def _prepare(self, items):
        return stack_poses([_pose(c) for c in items])

    def _between(self, data, i, j):
        R, t = data
        Rr, tr = relative_arrays(R[i], t[i], R[j], t[j])
        et = np.linalg.norm(tr, axis=1)
        er = np.linalg.norm(so3_log(Rr), axis=1)
        return et + self.lam * er, 0


class PointSetMetric(Metric):
    name = "pointset"

    def __init__(self, points):
        P = np.asarray(points, dtype=float).reshape(-1, 3) if points is not None else np.zeros((0, 3))
        if len(P) == 0:
            raise EmptyPointSet("pointset metric needs reference points")
        self.points = P

    def __call__(self, a, b):
        return point_set_distance(_pose(a), _pose(b), self.points)

    def _prepare(self, items):
        R, t = stack_poses([_pose(c) for c in items])
        return np.einsum("nij,mj->nmi", R, self.points) + t[:, None, :]

    def _between(self, data, i, j):
        diff = data[i] - data[j]
        return np.sqrt(np.mean(np.sum(diff * diff, axis=2), axis=1)), 0


class HomographyLieMetric(Metric):
    """Lie-algebra distance with per-pair Frobenius fallback outside the log domain.

    Calling the metric on a single pair raises :class:`LogDomainError`; the
    vectorized methods substitute the Frobenius distance and count the pairs.
    """

    name = "hlie"
    domain = "homography"

    def __call__(self, a, b):
        return homography_lie_distance(a, b)

    def _prepare(self, items):
        return _det1_stack(items)

    def _between(self, data, i, j):
        L, ok = gl3_log_batch(inv3(data[i]) @ data[j])
        d = np.sqrt(np.sum(L * L, axis=(1, 2)))
        if not ok.all():
            bad = ~ok
            d[bad] = _fro_signed(data[i[bad]], data[j[bad]])
        return d, int(np.count_nonzero(~ok))


class HomographyFrobeniusMetric(Metric):
    name = "hfro"
    domain = "homography"

    def __call__(self, a, b):
        return homography_frobenius_distance(a, b)

    def _prepare(self, items):
        return _det1_stack(items)

    def _between(self, data, i, j):
        return _fro_signed(data[i], data[j]), 0


def _fro_signed(A, B):
    dm = np.sqrt(np.sum((A - B) ** 2, axis=(1, 2)))
    dp = np.sqrt(np.sum((A + B) ** 2, axis=(1, 2)))
    return np.minimum(dm, dp)


def _pose(c) -> Pose:
    return c if isinstance(c, Pose) else c.pose


def _homography_array(h) -> np.ndarray:
    if isinstance(h, Homography):
        return h.H
    return np.asarray(h, dtype=float)


def _det1_stack(items: Sequence) -> np.ndarray:
    H = np.stack([_homography_array(h) for h in items])
    Hn, ok = normalize_homography_array(H, DET1)
    if not ok.all():
        raise DegenerateHomography("candidate homography is singular")
    return Hn


METRIC_NAMES = ("rte", "lielog", "pointset", "hlie", "hfro")


def get_metric(name: str | Metric, lam: float = DEFAULT_LAMBDA, points=None) -> Metric:
    """Resolve a metric by its config name."""
    if isinstance(name, Metric):
        return name
    if name == "rte":
        return RelativeTransformMetric(lam)
    if name == "lielog":
        return LieLogMetric(lam)
    if name == "pointset":
        return PointSetMetric(points)
    if name == "hlie":
        return HomographyLieMetric()
    if name == "hfro":
        return HomographyFrobeniusMetric()
    raise ValueError(f"unknown metric {name!r}; expected one of {METRIC_NAMES}")


__all__ = [
    "LogDomainError",
    "Se3MetricConfig",
    "HomographyMetricKind",
    "relative_transform_error",
    "lie_log_distance",
    "point_set_distance",
    "homography_lie_distance",
    "homography_frobenius_distance",
    "Metric",
    "LieLogMetric",
    "RelativeTransformMetric",
    "PointSetMetric",
    "HomographyLieMetric",
    "HomographyFrobeniusMetric",
    "get_metric",
    "METRIC_NAMES",
]
