"""Lie-group primitives: SO(3), SE(3) and the 3x3 general linear group.

Conventions
-----------
* A pose ``T = (R, t)`` maps a point ``p`` to ``R @ p + t``.
* Twists are 6-vectors ordered ``[rho, phi]``: ``rho`` is the translational
  part (scene units) and ``phi`` the axis-angle rotation (radians).
* ``se3_exp`` couples rotation into translation through the left Jacobian
  ``V(phi)``, i.e. ``t = V(phi) @ rho``.

Every function accepts stacked inputs with arbitrary leading dimensions, so
pairwise computations over thousands of candidates stay vectorized.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateHomography, LogDomainError

# Below this angle the trigonometric coefficients use Taylor series.
SMALL_ANGLE = 1e-5
# Branch switch for the near-pi logarithm: trace(R) < -1 + NEAR_PI_TRACE.
NEAR_PI_TRACE = 1e-6

_EYE3 = np.eye(3)


# ---------------------------------------------------------------------------
# so(3) / SO(3)
# ---------------------------------------------------------------------------

def hat(v):
    """Skew-symmetric matrix of a 3-vector (works on stacks)."""
    v = np.asarray(v, dtype=float)
    S = np.zeros(v.shape[:-1] + (3, 3))
    S[..., 0, 1] = -v[..., 2]
    S[..., 0, 2] = v[..., 1]
    S[..., 1, 0] = v[..., 2]
    S[..., 1, 2] = -v[..., 0]
    S[..., 2, 0] = -v[..., 1]
    S[..., 2, 1] = v[..., 0]
    return S


def vee(S):
    """Inverse of :func:`hat`; reads the lower-triangle entries."""
    S = np.asarray(S, dtype=float)
    return np.stack([S[..., 2, 1], S[..., 0, 2], S[..., 1, 0]], axis=-1)


def _rodrigues_coeffs(theta):
    """Return ``sin(x)/x``, ``(1-cos x)/x^2`` and ``(x-sin x)/x^3``."""
    theta = np.asarray(theta, dtype=float)
    small = theta < SMALL_ANGLE
    th = np.where(small, 1.0, theta)
    t2 = theta * theta
    a = np.where(small, 1.0 - t2 / 6.0 + t2 * t2 / 120.0, np.sin(th) / th)
    b = np.where(small, 0.5 - t2 / 24.0 + t2 * t2 / 720.0, (1.0 - np.cos(th)) / (th * th))
    c = np.where(small, 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0, (th - np.sin(th)) / (th ** 3))
    return a, b, c


def so3_exp(omega):
    """Rotation matrix for an axis-angle vector (Rodrigues formula)."""
    omega = np.asarray(omega, dtype=float)
    theta = np.linalg.norm(omega, axis=-1)
    a, b, _ = _rodrigues_coeffs(theta)
    K = hat(omega)
    return _EYE3 + a[..., None, None] * K + b[..., None, None] * (K @ K)


def so3_log(R):
    """Principal axis-angle vector of a rotation, with norm in ``[0, pi]``.

    Generic angles read the antisymmetric part of ``R``. When
    ``trace(R) < -1 + 1e-6`` the axis is taken from the symmetric part
    instead (the column of ``(R + R^T)/2 - cos(theta) I`` with the largest
    diagonal entry, i.e. the +1 eigenvector), with its sign chosen to agree
    with the antisymmetric part.
    """
    R = np.asarray(R, dtype=float)
    tr = np.trace(R, axis1=-2, axis2=-1)
    w = 0.5 * vee(R - np.swapaxes(R, -1, -2))
    s = np.linalg.norm(w, axis=-1)
    c = np.clip(0.5 * (tr - 1.0), -1.0, 1.0)
    theta = np.arctan2(s, c)

    small = theta < SMALL_ANGLE
    t2 = theta * theta
    safe_s = np.where(s > 0.0, s, 1.0)
    scale = np.where(small, 1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0, theta / safe_s)
    phi = scale[..., None] * w

    near_pi = tr < -1.0 + NEAR_PI_TRACE
    if np.any(near_pi):
        Rp = R[near_pi]
        cp = c[near_pi]
        B = 0.5 * (Rp + np.swapaxes(Rp, -1, -2)) - cp[:, None, None] * _EYE3
        diag = np.diagonal(B, axis1=-2, axis2=-1)
        k = np.argmax(diag, axis=-1)
        axis = B[np.arange(len(k)), :, k]
        axis = axis / np.linalg.norm(axis, axis=-1, keepdims=True)
        wp = w[near_pi]
        # sign from the dominant antisymmetric component
        j = np.argmax(np.abs(wp), axis=-1)
        ref = wp[np.arange(len(j)), j]
        flip = (axis[np.arange(len(j)), j] * ref) < 0.0
        axis[flip] *= -1.0
        phi[near_pi] = theta[near_pi][:, None] * axis
    return phi


def left_jacobian(phi):
    """SO(3) left Jacobian ``V(phi)`` used by the SE(3) exponential."""
    phi = np.asarray(phi, dtype=float)
    theta = np.linalg.norm(phi, axis=-1)
    _, b, c = _rodrigues_coeffs(theta)
    K = hat(phi)
    return _EYE3 + b[..., None, None] * K + c[..., None, None] * (K @ K)


# ---------------------------------------------------------------------------
# SE(3)
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform ``p -> R @ p + t``."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "R", np.array(self.R, dtype=float).reshape(3, 3))
        object.__setattr__(self, "t", np.array(self.t, dtype=float).reshape(3))

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, M) -> "Pose":
        M = np.asarray(M, dtype=float)
        return cls(M[:3, :3], M[:3, 3])

    def as_matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.R
        M[:3, 3] = self.t
        return M

    def inverse(self) -> "Pose":
        Rt = self.R.T
        return Pose(Rt, -Rt @ self.t)

    def compose(self, other: "Pose") -> "Pose":
        return Pose(self.R @ other.R, self.R @ other.t + self.t)

    __matmul__ = compose

    def apply(self, points) -> np.ndarray:
        """Transform one point (3,) or a stack (N, 3)."""
        return np.asarray(points, dtype=float) @ self.R.T + self.t

    def log(self) -> np.ndarray:
        return se3_log(self)

    def allclose(self, other: "Pose", atol: float = 1e-9) -> bool:
        return bool(np.allclose(self.R, other.R, atol=atol, rtol=0)
                    and np.allclose(self.t, other.t, atol=atol, rtol=0))

    def to_json(self) -> dict:
        return {"R": self.R.tolist(), "t": self.t.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "Pose":
        """Parse ``{"R": 3x3, "t": 3}``; ``R`` must be a proper rotation (1e-6)."""
        T = cls(obj["R"], obj["t"])
        if not (np.allclose(T.R @ T.R.T, _EYE3, atol=1e-6) and np.linalg.det(T.R) > 0):
            raise ValueError("R is not a proper rotation matrix")
        return T

    def __repr__(self):
        rv = so3_log(self.R)
        return f"Pose(rotvec={np.round(rv, 6).tolist()}, t={np.round(self.t, 6).tolist()})"


def pose_compose(T1: Pose, T2: Pose) -> Pose:
    return T1.compose(T2)


def pose_inverse(T: Pose) -> Pose:
    return T.inverse()


def stack_poses(poses) -> tuple[np.ndarray, np.ndarray]:
    """Split a sequence of poses into ``(N, 3, 3)`` rotations and ``(N, 3)`` translations."""
    R = np.stack([p.R for p in poses]) if len(poses) else np.zeros((0, 3, 3))
    t = np.stack([p.t for p in poses]) if len(poses) else np.zeros((0, 3))
    return R, t


def se3_exp_arrays(xi):
    """Vectorized SE(3) exponential returning ``(R, t)`` stacks."""
    xi = np.asarray(xi, dtype=float)
    rho, phi = xi[..., :3], xi[..., 3:]
    R = so3_exp(phi)
    t = np.einsum("...ij,...j->...i", left_jacobian(phi), rho)
    return R, t


def se3_log_arrays(R, t):
    """Vectorized SE(3) logarithm of ``(R, t)`` stacks; returns ``[rho, phi]``."""
    R = np.asarray(R, dtype=float)
    t = np.asarray(t, dtype=float)
    phi = so3_log(R)
    V = left_jacobian(phi)
    # V is invertible for |phi| <= pi, so solve instead of the closed-form inverse
    # whose coefficients blow up near pi.
    rho = np.linalg.solve(V, t[..., None])[..., 0]
    return np.concatenate([rho, phi], axis=-1)


def se3_exp(xi) -> Pose:
    """Pose for a single twist ``[rho, phi]``."""
    R, t = se3_exp_arrays(np.asarray(xi, dtype=float).reshape(6))
    return Pose(R, t)


def se3_log(T: Pose) -> np.ndarray:
    """Twist ``[rho, phi]`` of a single pose."""
    return se3_log_arrays(T.R, T.t)


def relative_arrays(R1, t1, R2, t2):
    """``T1^-1 T2`` on stacks; broadcasting over leading dims."""
    R1t = np.swapaxes(R1, -1, -2)
    R = R1t @ R2
    t = np.einsum("...ij,...j->...i", R1t, t2 - t1)
    return R, t


# ---------------------------------------------------------------------------
# GL(3): exponential and principal logarithm
# ---------------------------------------------------------------------------

def det3(M):
    M = np.asarray(M, dtype=float)
    return (M[..., 0, 0] * (M[..., 1, 1] * M[..., 2, 2] - M[..., 1, 2] * M[..., 2, 1])
            - M[..., 0, 1] * (M[..., 1, 0] * M[..., 2, 2] - M[..., 1, 2] * M[..., 2, 0])
            + M[..., 0, 2] * (M[..., 1, 0] * M[..., 2, 1] - M[..., 1, 1] * M[..., 2, 0]))


def inv3(M):
    """Cofactor inverse of stacked 3x3 matrices (much faster than LAPACK per-matrix calls)."""
    M = np.asarray(M, dtype=float)
    a, b, c = M[..., 0, 0], M[..., 0, 1], M[..., 0, 2]
    d, e, f = M[..., 1, 0], M[..., 1, 1], M[..., 1, 2]
    g, h, i = M[..., 2, 0], M[..., 2, 1], M[..., 2, 2]
    C = np.empty_like(M)
    C[..., 0, 0] = e * i - f * h
    C[..., 0, 1] = c * h - b * i
    C[..., 0, 2] = b * f - c * e
    C[..., 1, 0] = f * g - d * i
    C[..., 1, 1] = a * i - c * g
    C[..., 1, 2] = c * d - a * f
    C[..., 2, 0] = d * h - e * g
    C[..., 2, 1] = b * g - a * h
    C[..., 2, 2] = a * e - b * d
    det = a * C[..., 0, 0] + b * C[..., 1, 0] + c * C[..., 2, 0]
    return C / det[..., None, None]


def _fro(M):
    return np.sqrt(np.sum(M * M, axis=(-2, -1)))


def gl3_exp(A):
    """Matrix exponential by scaling and squaring of a truncated Taylor series."""
    A = np.asarray(A, dtype=float)
    batch = A.reshape(-1, 3, 3)
    nrm = _fro(batch)
    s = np.maximum(0, np.ceil(np.log2(np.maximum(nrm, 1e-300) / 0.25))).astype(int)
    X = batch / (2.0 ** s)[:, None, None]
    E = np.broadcast_to(_EYE3, X.shape).copy()
    term = E.copy()
    for k in range(1, 15):
        term = term @ X / k
        E = E + term
    for j in range(int(s.max(initial=0))):
        m = s > j
        E[m] = E[m] @ E[m]
    return E.reshape(A.shape)


_SQRT_TOL = 1e-14
_SQRT_MAXITER = 60
_LOG_NEAR_I = 0.5
_LOG_MAX_ROOTS = 60
# ||Z|| <= 1/3 once ||X - I||_F <= 0.5, so 18 odd terms reach double precision.
_GREGORY_TERMS = 18


def in_log_domain(M):
    """True where a real 3x3 matrix has a real principal logarithm.

    Real arithmetic only: with ``q(s) = det(s I + M)``, ``M`` has an eigenvalue
    on the closed negative real axis iff ``det(M) <= 0`` or ``q`` has a root at
    some ``s > 0``. Since ``q(0) = det(M) > 0``, the latter happens iff the
    local minimum of the cubic lies at ``s > 0`` with ``q <= 0``.
    """
    M = np.asarray(M, dtype=float)
    a0 = det3(M)
    a2 = np.trace(M, axis1=-2, axis2=-1)
    a1 = (M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
          + M[..., 0, 0] * M[..., 2, 2] - M[..., 0, 2] * M[..., 2, 0]
          + M[..., 1, 1] * M[..., 2, 2] - M[..., 1, 2] * M[..., 2, 1])
    disc = a2 * a2 - 3.0 * a1
    root = np.sqrt(np.maximum(disc, 0.0))
    s = (-a2 + root) / 3.0
    q = ((s + a2) * s + a1) * s + a0
    negative_eig = (disc >= 0.0) & (s > 0.0) & (q <= 0.0)
    return np.isfinite(a0) & (a0 >= 1e-12) & ~negative_eig


def _sqrtm_db(X):
    """Principal square roots of a stack via the scaled product Denman-Beavers iteration.

    Returns ``(Y, ok)``; ``ok`` is False where the iteration did not converge,
    which happens when a real negative eigenvalue leaves no real principal root.
    """
    M = X.copy()
    Y = X.copy()
    ok = np.zeros(len(X), dtype=bool)
    active = np.ones(len(X), dtype=bool)
    for _ in range(_SQRT_MAXITER):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        Ma, Ya = M[idx], Y[idx]
        Mi = inv3(Ma)
        far = _fro(Ma - _EYE3) > 1e-2
        mu = np.ones(len(idx))
        d = np.abs(det3(Ma[far]))
        with np.errstate(divide="ignore", invalid="ignore"):
            mu[far] = d ** (-1.0 / 6.0)
        mu = np.where(np.isfinite(mu), mu, 1.0)
        mu2 = (mu * mu)[:, None, None]
        Mn = 0.5 * (_EYE3 + 0.5 * (mu2 * Ma + Mi / mu2))
        Yn = 0.5 * mu[:, None, None] * (Ya + Ya @ Mi / mu2)
        M[idx], Y[idx] = Mn, Yn
        done = _fro(Mn - _EYE3) < _SQRT_TOL
        finite = np.isfinite(Mn).all(axis=(-2, -1)) & np.isfinite(Yn).all(axis=(-2, -1))
        ok[idx[done & finite]] = True
        active[idx[done | ~finite]] = False
    return Y, ok


def gl3_log_batch(M):
    """Principal logarithms of a stack of 3x3 matrices.

    Inverse scaling and squaring: take square roots until each matrix is within
    0.25 (Frobenius) of the identity, evaluate ``log`` with the Gregory series
    ``2 artanh((X - I)(X + I)^-1)``, then multiply by ``2**k``.

    Returns ``(L, ok)`` where ``ok`` marks entries inside the principal-log
    domain. Entries with ``ok == False`` hold NaN.
    """
    M = np.asarray(M, dtype=float)
    shape = M.shape
    X = M.reshape(-1, 3, 3).copy()
    n = len(X)
    ok = in_log_domain(X)
    k = np.zeros(n)
    for _ in range(_LOG_MAX_ROOTS):
        far = ok & (_fro(X - _EYE3) > _LOG_NEAR_I)
        idx = np.flatnonzero(far)
        if idx.size == 0:
            break
        Y, conv = _sqrtm_db(X[idx])
        ok[idx[~conv]] = False
        good = idx[conv]
        X[good] = Y[conv]
        k[good] += 1
    else:
        ok &= _fro(X - _EYE3) <= _LOG_NEAR_I

    L = np.full_like(X, np.nan)
    idx = np.flatnonzero(ok)
    if idx.size:
        Xg = X[idx]
        Z = (Xg - _EYE3) @ inv3(Xg + _EYE3)
        Z2 = Z @ Z
        term = Z
        S = Z.copy()
        for j in range(1, _GREGORY_TERMS):
            term = term @ Z2
            S = S + term / (2 * j + 1)
        L[idx] = 2.0 * S * (2.0 ** k[idx])[:, None, None]
    return L.reshape(shape), ok.reshape(shape[:-2])


def gl3_log(M) -> np.ndarray:
    """Principal matrix logarithm of a single 3x3 matrix.

    Raises :class:`LogDomainError` when ``M`` is (nearly) singular or has an
    eigenvalue on the closed negative real axis.
    """
    M = np.asarray(M, dtype=float).reshape(3, 3)
    if abs(det3(M)) < 1e-12:
        raise LogDomainError("matrix is singular (|det| < 1e-12)")
    L, ok = gl3_log_batch(M[None])
    if not ok[0]:
        raise LogDomainError("matrix has an eigenvalue on the closed negative real axis")
    return L[0]


# ---------------------------------------------------------------------------
# Homographies
# ---------------------------------------------------------------------------

H33 = "h33"
DET1 = "det1"
_NORM_MODES = (H33, DET1)


@dataclass(frozen=True, eq=False)
class Homography:
    """Normalized 3x3 projective transform mapping ``p -> H p`` (homogeneous)."""

    H: np.ndarray
    norm: str = H33

    def __post_init__(self):
        object.__setattr__(self, "H", np.array(self.H, dtype=float).reshape(3, 3))
        if self.norm not in _NORM_MODES:
            raise ValueError(f"unknown normalization mode {self.norm!r}")

    def renormalize(self, mode: str) -> "Homography":
        return normalize_homography(self.H, mode)

    def inverse(self) -> "Homography":
        return normalize_homography(inv3(self.H), self.norm)

    def apply(self, points) -> np.ndarray:
        return apply_homography(self.H, points)

    def to_json(self) -> dict:
        return {"H": self.H.tolist(), "norm": self.norm}

    @classmethod
    def from_json(cls, obj: dict) -> "Homography":
        return normalize_homography(obj["H"], obj.get("norm", H33))

    def __array__(self, dtype=None, copy=None):
        return self.H if dtype is None else self.H.astype(dtype)


def normalize_homography_array(H, mode: str):
    """Vectorized normalization; returns ``(Hn, ok)`` without raising."""
    H = np.asarray(H, dtype=float)
    det = det3(H)
    if mode == H33:
        h = H[..., 2, 2]
        ok = (np.abs(det) > 1e-12) & (np.abs(h) > 1e-9)
        scale = np.where(ok, h, 1.0)
    elif mode == DET1:
        ok = np.abs(det) > 1e-12
        # real cube root keeps the sign, so H / cbrt(det) has det = +1 for H and -H alike
        scale = np.where(ok, np.cbrt(det), 1.0)
    else:
        raise ValueError(f"unknown normalization mode {mode!r}")
    ok &= np.isfinite(det)
    return H / scale[..., None, None], ok


def normalize_homography(H, mode: str = H33) -> Homography:
    if isinstance(H, Homography):
        H = H.H
    H = np.asarray(H, dtype=float).reshape(3, 3)
    Hn, ok = normalize_homography_array(H, mode)
    if not ok:
        if abs(det3(H)) <= 1e-12:
            raise DegenerateHomography("homography is singular (|det| <= 1e-12)")
        raise DegenerateHomography("H33 is too close to zero for unit-lower-right normalization")
    return Homography(Hn, mode)


def apply_homography(H, points) -> np.ndarray:
    """Map 2D points through ``H``; points with ``|w| < 1e-12`` become ``inf``."""
    H = np.asarray(H, dtype=float)
    P = np.asarray(points, dtype=float)
    x = P @ H[:2, :2].T + H[:2, 2]
    w = P @ H[2, :2] + H[2, 2]
    bad = np.abs(w) < 1e-12
    w = np.where(bad, 1.0, w)
    out = x / w[..., None]
    out[bad] = np.inf
    return out
