"""Synthetic scenes and correspondences with planted ground truth."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .lie import H33, Homography, Pose, apply_homography, gl3_exp, normalize_homography, so3_exp
from .solvers import Landmark, LandmarkMap, Matches

DEFAULT_ALPHABET = ("G", "L", "X", "T")


@dataclass
class SynthSceneParams:
    n_landmarks: int = 12
    n_observed: int = 20
    outlier_fraction: float = 0.0
    noise_sigma: float = 0.0
    label_alphabet: tuple[str, ...] = DEFAULT_ALPHABET
    scene_extent: tuple[float, float, float] = (10.0, 8.0, 3.0)
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.outlier_fraction < 1.0:
            raise ValueError("outlier_fraction must lie in [0, 1)")
        if self.n_inliers > self.n_landmarks:
            raise ValueError("more inlier observations requested than there are landmarks")
        if self.n_landmarks < 3:
            raise ValueError("need at least 3 landmarks")

    @property
    def n_outliers(self) -> int:
        return int(round(self.outlier_fraction * self.n_observed))

    @property
    def n_inliers(self) -> int:
        return self.n_observed - self.n_outliers

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.scene_extent))


@dataclass
class SynthMatchParams:
    n_matches: int = 200
    outlier_fraction: float = 0.0
    noise_sigma: float = 0.0
    image_size: tuple[int, int] = (640, 480)
    gt_homography_spread: float = 0.15
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.outlier_fraction < 1.0:
            raise ValueError("outlier_fraction must lie in [0, 1)")
        if self.n_matches < 4:
            raise ValueError("need at least 4 matches")


class Scene3D(NamedTuple):
    landmark_map: LandmarkMap
    observations: LandmarkMap
    gt_pose: Pose
    is_inlier: np.ndarray


class MatchScene(NamedTuple):
    matches: Matches
    gt_H: Homography
    is_inlier: np.ndarray


def random_rotation(rng: np.random.Generator, max_angle: float = np.pi) -> np.ndarray:
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return so3_exp(axis * rng.uniform(0.0, max_angle))


def synth_scene_3d(params: SynthSceneParams) -> Scene3D:
    """Map, robot-frame observations and the ground-truth robot pose.

    Landmarks are uniform in a box centered on the origin, labeled by cycling
    the alphabet. Inlier observations are ``gt^-1 landmark`` plus Gaussian
    noise; outliers are uniform in the box with a uniform random label. The
    observation order is shuffled.
    """
    rng = np.random.default_rng(params.seed)
    ext = np.asarray(params.scene_extent, dtype=float)
    alphabet = list(params.label_alphabet)
    pos = rng.uniform(-0.5, 0.5, size=(params.n_landmarks, 3)) * ext
    labels = [alphabet[i % len(alphabet)] for i in range(params.n_landmarks)]
    lmap = LandmarkMap([Landmark(p, c) for p, c in zip(pos, labels)], alphabet)

    gt = Pose(random_rotation(rng), rng.uniform(-0.25, 0.25, size=3) * ext)
    inv = gt.inverse()
    chosen = rng.choice(params.n_landmarks, size=params.n_inliers, replace=False)
    obs_in = inv.apply(pos[chosen]) + rng.normal(scale=params.noise_sigma, size=(params.n_inliers, 3)) \
        if params.noise_sigma > 0 else inv.apply(pos[chosen])
    lab_in = [labels[j] for j in chosen]
    out_world = rng.uniform(-0.5, 0.5, size=(params.n_outliers, 3)) * ext
    obs_out = inv.apply(out_world) if params.n_outliers else np.zeros((0, 3))
    lab_out = [alphabet[k] for k in rng.integers(0, len(alphabet), size=params.n_outliers)]

    allpos = np.vstack([obs_in, obs_out])
    alllab = lab_in + lab_out
    inlier = np.r_[np.ones(params.n_inliers, bool), np.zeros(params.n_outliers, bool)]
    perm = rng.permutation(params.n_observed)
    obs = LandmarkMap([Landmark(allpos[k], alllab[k]) for k in perm], alphabet)
    return Scene3D(lmap, obs, gt, inlier[perm])


def pixel_normalizer(image_size) -> np.ndarray:
    """Similarity taking the image to roughly ``[-1, 1]^2`` about its center."""
    w, h = image_size
    s = 2.0 / max(w, h)
    return np.array([[s, 0.0, -s * (w - 1) / 2.0], [0.0, s, -s * (h - 1) / 2.0], [0.0, 0.0, 1.0]])


def random_homography(rng: np.random.Generator, image_size, spread: float) -> Homography:
    """``C^-1 exp(spread * A) C`` for a random traceless generator ``A``.

    ``C`` maps pixels to normalized coordinates; the bottom row of ``A``
    supplies a modest perspective component. ``spread = 0`` gives the identity.
    """
    A = rng.uniform(-1.0, 1.0, size=(3, 3))
    A[2, :2] *= 0.5
    A -= np.trace(A) / 3.0 * np.eye(3)
    C = pixel_normalizer(image_size)
    H = np.linalg.inv(C) @ gl3_exp(spread * A) @ C
    return normalize_homography(H, H33)


def _inside(P, w, h):
    return (P[:, 0] >= 0) & (P[:, 0] <= w - 1) & (P[:, 1] >= 0) & (P[:, 1] <= h - 1)


def synth_matches_2d(params: SynthMatchParams) -> MatchScene:
    """Correspondences between two images related by a random ground-truth homography.

    Inliers are uniform source points mapped through the homography with
    isotropic Gaussian pixel noise on the target, kept only when both ends
    fall inside the images. Outliers are independent uniform points in both
    images. Exactly ``round(outlier_fraction * n_matches)`` outliers are
    produced and the order is shuffled.
    """
    rng = np.random.default_rng(params.seed)
    w, h = params.image_size
    gt = random_homography(rng, params.image_size, params.gt_homography_spread)
    n_out = int(round(params.outlier_fraction * params.n_matches))
    n_in = params.n_matches - n_out
    ps, qs = [], []
    have = 0
    for _ in range(1000):
        if have >= n_in:
            break
        m = max(2 * (n_in - have), 16)
        p = rng.uniform(0.0, 1.0, size=(m, 2)) * [w - 1, h - 1]
        q = apply_homography(gt.H, p)
        if params.noise_sigma > 0:
            q = q + rng.normal(scale=params.noise_sigma, size=q.shape)
        keep = _inside(q, w, h) & np.isfinite(q).all(axis=1)
        ps.append(p[keep])
        qs.append(q[keep])
        have += int(keep.sum())
    else:
        raise RuntimeError("could not place inlier matches inside the target image")
    p_in = np.vstack(ps)[:n_in]
    q_in = np.vstack(qs)[:n_in]
    p_out = rng.uniform(0.0, 1.0, size=(n_out, 2)) * [w - 1, h - 1]
    q_out = rng.uniform(0.0, 1.0, size=(n_out, 2)) * [w - 1, h - 1]
    P = np.vstack([p_in, p_out])
    Q = np.vstack([q_in, q_out])
    inlier = np.r_[np.ones(n_in, bool), np.zeros(n_out, bool)]
    perm = rng.permutation(params.n_matches)
    return MatchScene(Matches(P[perm], Q[perm]), gt, inlier[perm])


def render_texture(image_size, seed: int = 0, channels: int = 3) -> np.ndarray:
    """Smooth random 8-bit texture with enough structure to judge a stitch by eye."""
    from scipy import ndimage

    w, h = image_size
    rng = np.random.default_rng(seed)
    noise = rng.normal(size=(h, w, channels))
    img = np.stack([ndimage.gaussian_filter(noise[..., c], sigma=3.0) for c in range(channels)], axis=2)
    img -= img.min()
    img *= 255.0 / max(img.max(), 1e-12)
    out = np.floor(img + 0.5).astype(np.uint8)
    return out[..., 0] if channels == 1 else out


def render_pair(gt_H, image_size, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Left image and the right image seen through ``gt_H`` (left -> right).

    Right pixels that ``gt_H`` maps from outside the left image are black.
    """
    from .raster import warp_image

    w, h = image_size
    left = render_texture(image_size, seed)
    H = gt_H.H if isinstance(gt_H, Homography) else np.asarray(gt_H, float)
    right, _ = warp_image(left, H, (0, 0, w, h))
    return left, right
