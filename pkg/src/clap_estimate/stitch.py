"""Homography clustering and two-image stitching."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .averaging import average_homographies
from .clustering import ClusterConfig, pairwise_distances, trim_iterate
from .errors import DegenerateHomography
from .lie import H33, Homography, inv3, normalize_homography
from .ransac import inlier_ratio, refine_homography, symmetric_reprojection_error
from .raster import BLEND_MODES, FEATHER, as_raster, composite, corner_bounds, warp_image
from .solvers import Matches, sample_homography_candidates

CENTERS = ("medoid", "liemean", "liemedian")
MAX_CANVAS_FACTOR = 8
SPREAD_FLAG = 0.25


@dataclass
class StitchConfig:
    n_candidates: int = 400
    cluster: ClusterConfig = field(default_factory=lambda: ClusterConfig(metric="hlie"))
    center: str = "medoid"
    refine: bool = True
    blend: str = FEATHER
    seed: int = 0
    inlier_threshold: float = 2.0
    condition: bool = True

    def __post_init__(self):
        if self.n_candidates < 4:
            raise ValueError("n_candidates must be >= 4")
        if self.center not in CENTERS:
            raise ValueError(f"center must be one of {CENTERS}")
        if self.blend not in BLEND_MODES:
            raise ValueError(f"blend must be one of {BLEND_MODES}")
        if self.inlier_threshold <= 0:
            raise ValueError("inlier_threshold must be positive")


def conditioner(matches: Matches) -> np.ndarray:
    """Similarity moving all match endpoints to zero mean and RMS radius sqrt(2).

    One transform serves both images so that ``C H C^-1`` is still a
    homography between the conditioned frames.
    """
    P = np.vstack([matches.p, matches.q])
    c = P.mean(axis=0)
    rms = math.sqrt(float(np.mean(np.sum((P - c) ** 2, axis=1))))
    s = math.sqrt(2.0) / rms if rms > 0 else 1.0
    return np.array([[s, 0.0, -s * c[0]], [0.0, s, -s * c[1]], [0.0, 0.0, 1.0]])


def clap_homography(matches: Matches, cfg: StitchConfig | None = None):
    """Estimate the homography ``left -> right`` by clustering DLT candidates.

    Candidates are compared in a conditioned frame (``C H C^-1``, see
    :func:`conditioner`) so that the Lie distance weighs translation and
    linear parts on a similar scale. Returns the homography (``H33`` form) and
    a diagnostics dict.
    """
    cfg = cfg or StitchConfig()
    cands = sample_homography_candidates(matches, cfg.n_candidates, cfg.seed)
    H = np.stack([h.H for h in cands.items])
    if cfg.condition:
        C = conditioner(matches)
        H = C[None] @ H @ inv3(C)[None]
    else:
        C = np.eye(3)
    ccfg = cfg.cluster
    D, fallbacks = pairwise_distances(list(H), ccfg.get_metric(), return_fallbacks=True)
    res = trim_iterate(list(H), ccfg, D, fallbacks)
    surv = res.survivors
    spread = float(np.median(D[res.center_index, surv]))

    if cfg.center == "medoid":
        Hc = H[res.center_index]
    else:
        Hc = average_homographies(list(H[surv]), cfg.center).H
    Hpix = normalize_homography(inv3(C) @ Hc @ C, H33)

    status = "off"
    if cfg.refine:
        Hpix, status = refine_homography(Hpix, matches, cfg.inlier_threshold, full_output=True)
    flags = []
    if spread > SPREAD_FLAG:
        flags.append("wide_cluster")
    if _competing_cluster(D, res.center_index, surv):
        flags.append("competing_cluster")
    diag = {
        "n_candidates": len(cands),
        "draws": cands.attempts,
        "center_index": res.center_index,
        "survivors": surv,
        "survivors_per_round": res.per_round_counts,
        "fallback_pairs": res.fallback_pairs,
        "survivor_spread": spread,
        "refine": status,
        "flags": flags,
    }
    return Hpix, diag


def _competing_cluster(D, center: int, survivors, min_radius: float = 1e-6) -> bool:
    """True if a candidate well outside the final cluster has comparable support.

    Support is the number of candidates within the cluster radius (the
    largest survivor distance from the center). Repeated structure, such as
    two planes matched equally well, shows up as a second dense clump.
    """
    r = max(float(np.max(D[center, survivors])), min_radius)
    support = np.count_nonzero(D <= r, axis=1)
    far = D[center] > 2.0 * r
    return bool(far.any() and support[far].max() >= 0.5 * support[center])


def canvas_bounds(left_shape, right_shape, H_right_to_left) -> tuple[int, int, int, int]:
    """``(x0, y0, width, height)`` covering the left image and the warped right corners."""
    hl, wl = left_shape[:2]
    hr, wr = right_shape[:2]
    xmin, ymin, xmax, ymax = corner_bounds(H_right_to_left, wr, hr)
    tol = 1e-6
    x0 = min(0, math.floor(xmin + tol))
    y0 = min(0, math.floor(ymin + tol))
    x1 = max(wl - 1, math.ceil(xmax - tol))
    y1 = max(hl - 1, math.ceil(ymax - tol))
    width, height = x1 - x0 + 1, y1 - y0 + 1
    limit = MAX_CANVAS_FACTOR * (wl * hl + wr * hr)
    if width * height > limit:
        raise DegenerateHomography(
            f"canvas {width}x{height} exceeds {MAX_CANVAS_FACTOR}x the input area")
    return x0, y0, width, height


def place(raster, bounds) -> tuple[np.ndarray, np.ndarray]:
    """Paste ``raster`` (at the origin of its own frame) onto the canvas."""
    raster = as_raster(raster)
    x0, y0, width, height = bounds
    out = np.zeros((height, width) + raster.shape[2:], dtype=np.uint8)
    mask = np.zeros((height, width), dtype=bool)
    h, w = raster.shape[:2]
    out[-y0:-y0 + h, -x0:-x0 + w] = raster
    mask[-y0:-y0 + h, -x0:-x0 + w] = True
    return out, mask


def build_report(H: Homography, matches: Matches, diag: dict, inlier_threshold: float) -> dict:
    e, mean = symmetric_reprojection_error(H, matches)
    inl = np.flatnonzero(e <= inlier_threshold)
    return {
        "H": H.H.tolist(),
        "sre_mean": _finite(mean),
        "sre_samples": [_finite(v) for v in e],
        "inlier_ratio": inlier_ratio(inl, len(matches)),
        "survivors_per_round": list(diag["survivors_per_round"]),
        "fallback_pairs": int(diag["fallback_pairs"]),
    }


def _finite(v):
    # JSON has no infinity; unmappable matches are reported as null
    v = float(v)
    return v if math.isfinite(v) else None


def stitch(left, right, matches: Matches, cfg: StitchConfig | None = None):
    """Warp ``right`` into the frame of ``left`` and composite.

    ``matches`` pair points of the left image (``p``) with points of the
    right image (``q``), so the estimated ``H`` maps left to right and the
    right image is warped by ``H^-1``. Returns ``(raster, report)``.
    """
    cfg = cfg or StitchConfig()
    left = as_raster(left)
    right = as_raster(right)
    if left.ndim != right.ndim:
        raise ValueError("left and right must have the same number of channels")
    H, diag = clap_homography(matches, cfg)
    Hinv = normalize_homography(inv3(H.H), H33)
    bounds = canvas_bounds(left.shape, right.shape, Hinv.H)
    lc, lm = place(left, bounds)
    wc, wm = warp_image(right, Hinv.H, bounds)
    out = composite(lc, wc, (lm, wm), cfg.blend)
    report = build_report(H, matches, diag, cfg.inlier_threshold)
    return out, report


REPORT_KEYS = ("H", "sre_mean", "sre_samples", "inlier_ratio", "survivors_per_round", "fallback_pairs")


def validate_report(report: dict) -> None:
    """Raise ``ValueError`` unless ``report`` follows the stitching report schema."""
    missing = [k for k in REPORT_KEYS if k not in report]
    if missing:
        raise ValueError(f"report is missing keys {missing}")
    H = report["H"]
    if not (isinstance(H, list) and len(H) == 3 and all(isinstance(r, list) and len(r) == 3 for r in H)):
        raise ValueError("H must be a 3x3 nested list")
    if not all(isinstance(v, (int, float)) for r in H for v in r):
        raise ValueError("H entries must be numbers")
    if report["sre_mean"] is not None and not isinstance(report["sre_mean"], (int, float)):
        raise ValueError("sre_mean must be a number or null")
    if not isinstance(report["sre_samples"], list):
        raise ValueError("sre_samples must be a list")
    if not all(v is None or isinstance(v, (int, float)) for v in report["sre_samples"]):
        raise ValueError("sre_samples entries must be numbers or null")
    r = report["inlier_ratio"]
    if not isinstance(r, (int, float)) or not 0.0 <= r <= 1.0:
        raise ValueError("inlier_ratio must be a number in [0, 1]")
    s = report["survivors_per_round"]
    if not (isinstance(s, list) and all(isinstance(v, int) and v >= 0 for v in s)):
        raise ValueError("survivors_per_round must be a list of counts")
    if any(b > a for a, b in zip(s, s[1:])):
        raise ValueError("survivors_per_round must be non-increasing")
    if not (isinstance(report["fallback_pairs"], int) and report["fallback_pairs"] >= 0):
        raise ValueError("fallback_pairs must be a non-negative integer")
