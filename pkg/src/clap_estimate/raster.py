"""8-bit rasters, PPM/PGM I/O, homography warping and compositing.

A raster is a ``uint8`` array of shape ``(height, width)`` or
``(height, width, 3)``. Pixel ``(x, y)`` sits at integer coordinates, so an
image covers ``[0, w - 1] x [0, h - 1]``.
"""
from __future__ import annotations

import re
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch
from .lie import Homography, inv3

NO_BLEND = "noblend"
OVERWRITE = "overwrite"
FEATHER = "feather"
BLEND_MODES = (NO_BLEND, OVERWRITE, FEATHER)

# feather weights are fixed point with this many fractional bits
WEIGHT_BITS = 16
WEIGHT_ONE = 1 << WEIGHT_BITS


def as_raster(a) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim not in (2, 3) or (a.ndim == 3 and a.shape[2] not in (1, 3)):
        raise ValueError(f"raster must be (h, w) or (h, w, 3), got shape {a.shape}")
    if a.ndim == 3 and a.shape[2] == 1:
        a = a[:, :, 0]
    return np.ascontiguousarray(a, dtype=np.uint8)


# ---------------------------------------------------------------------------
# PPM / PGM
# ---------------------------------------------------------------------------

_HEADER = re.compile(rb"\A(P[56])\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s+"
                     rb"(?:#[^\n]*\n\s*)*(\d+)\s")


def read_ppm(path) -> np.ndarray:
    """Read a binary PPM (P6) or PGM (P5) file with maxval 255."""
    data = Path(path).read_bytes()
    m = _HEADER.match(data)
    if not m:
        raise ValueError(f"{path}: not a binary PPM/PGM file")
    magic, w, h, maxval = m.group(1), int(m.group(2)), int(m.group(3)), int(m.group(4))
    if maxval != 255:
        raise ValueError(f"{path}: only maxval 255 is supported, got {maxval}")
    ch = 3 if magic == b"P6" else 1
    body = data[m.end():m.end() + w * h * ch]
    if len(body) != w * h * ch:
        raise ValueError(f"{path}: truncated pixel data")
    arr = np.frombuffer(body, dtype=np.uint8)
    return arr.reshape((h, w, 3) if ch == 3 else (h, w)).copy()


def write_ppm(path, raster) -> None:
    """Write P6 for color rasters and P5 for single-channel ones."""
    r = as_raster(raster)
    h, w = r.shape[:2]
    magic = b"P6" if r.ndim == 3 else b"P5"
    Path(path).write_bytes(magic + b"\n%d %d\n255\n" % (w, h) + r.tobytes())


# ---------------------------------------------------------------------------
# warping
# ---------------------------------------------------------------------------

def corner_bounds(H, width: int, height: int) -> tuple[float, float, float, float]:
    """Bounding box ``(xmin, ymin, xmax, ymax)`` of the image corners mapped by ``H``."""
    H = np.asarray(H, dtype=float)
    c = np.array([[0, 0, 1], [width - 1, 0, 1], [0, height - 1, 1], [width - 1, height - 1, 1]], float)
    m = c @ H.T
    if np.any(m[:, 2] <= 1e-12):
        raise ValueError("image corner maps behind the camera (w <= 0)")
    xy = m[:, :2] / m[:, 2:3]
    return float(xy[:, 0].min()), float(xy[:, 1].min()), float(xy[:, 0].max()), float(xy[:, 1].max())


def bilinear_sample(src: np.ndarray, x: np.ndarray, y: np.ndarray):
    """Sample ``src`` at float coordinates; returns ``(values_float, inside_mask)``."""
    h, w = src.shape[:2]
    eps = 1e-9
    inside = (x >= -eps) & (x <= w - 1 + eps) & (y >= -eps) & (y <= h - 1 + eps)
    xc = np.clip(x, 0, w - 1)
    yc = np.clip(y, 0, h - 1)
    x0 = np.minimum(np.floor(xc).astype(np.int64), max(w - 2, 0))
    y0 = np.minimum(np.floor(yc).astype(np.int64), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xc - x0
    fy = yc - y0
    img = src.astype(float)
    if img.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    return top * (1 - fy) + bot * fy, inside


def round_half_up(v) -> np.ndarray:
    return np.clip(np.floor(np.asarray(v) + 0.5), 0, 255).astype(np.uint8)


def warp_image(src, H, out_bounds) -> tuple[np.ndarray, np.ndarray]:
    """Warp ``src`` by ``H`` onto the canvas ``out_bounds = (x0, y0, width, height)``.

    Canvas pixel ``(i, j)`` has coordinates ``(x0 + i, y0 + j)`` in the output
    frame; it is inverse-mapped through ``H^-1`` and sampled bilinearly.
    Returns the warped raster and a boolean coverage mask.
    """
    src = as_raster(src)
    Hm = H.H if isinstance(H, Homography) else np.asarray(H, dtype=float)
    x0, y0, width, height = (int(v) for v in out_bounds)
    Hi = inv3(Hm)
    jj, ii = np.mgrid[0:height, 0:width]
    X = ii.astype(float) + x0
    Y = jj.astype(float) + y0
    u = Hi[0, 0] * X + Hi[0, 1] * Y + Hi[0, 2]
    v = Hi[1, 0] * X + Hi[1, 1] * Y + Hi[1, 2]
    w = Hi[2, 0] * X + Hi[2, 1] * Y + Hi[2, 2]
    valid = w > 1e-12
    w = np.where(valid, w, 1.0)
    sx, sy = u / w, v / w
    vals, inside = bilinear_sample(src, sx, sy)
    mask = valid & inside
    out = round_half_up(vals)
    out[~mask] = 0
    return out, mask


# ---------------------------------------------------------------------------
# compositing
# ---------------------------------------------------------------------------

def boundary_distance(mask: np.ndarray) -> np.ndarray:
    """Exact Euclidean distance from each mask pixel to the nearest pixel outside it.

    The canvas border counts as outside, so every covered pixel gets a
    distance of at least 1.
    """
    padded = np.pad(np.asarray(mask, bool), 1, constant_values=False)
    return ndimage.distance_transform_edt(padded)[1:-1, 1:-1]


def feather_weights(mask_left, mask_right) -> tuple[np.ndarray, np.ndarray]:
    """Integer weights ``(w_left, w_right)`` that sum to ``WEIGHT_ONE`` on covered pixels.

    In the overlap the left weight is ``d_l / (d_l + d_r)`` of the boundary
    distances, quantized; the right weight is the exact complement.
    """
    ml = np.asarray(mask_left, bool)
    mr = np.asarray(mask_right, bool)
    dl = boundary_distance(ml)
    dr = boundary_distance(mr)
    wl = np.zeros(ml.shape, dtype=np.int64)
    wl[ml & ~mr] = WEIGHT_ONE
    both = ml & mr
    frac = dl[both] / (dl[both] + dr[both])
    wl[both] = np.floor(frac * WEIGHT_ONE + 0.5).astype(np.int64)
    wr = np.where(ml | mr, WEIGHT_ONE - wl, 0)
    wr[~mr] = 0
    return wl, wr


def composite(left, warped, masks, blend: str = FEATHER) -> np.ndarray:
    """Combine two canvas-sized rasters given their coverage ``masks = (left, right)``.

    ``noblend`` lets the left image win in the overlap, ``overwrite`` the
    warped one, and ``feather`` mixes them with distance-transform weights.
    """
    left = as_raster(left)
    warped = as_raster(warped)
    ml, mr = (np.asarray(m, bool) for m in masks)
    if left.shape != warped.shape or ml.shape != left.shape[:2] or mr.shape != left.shape[:2]:
        raise DimensionMismatch("left, warped and masks must share the canvas size")
    if blend not in BLEND_MODES:
        raise ValueError(f"unknown blend mode {blend!r}")
    out = np.zeros_like(left)
    if blend == NO_BLEND:
        out[mr] = warped[mr]
        out[ml] = left[ml]
    elif blend == OVERWRITE:
        out[ml] = left[ml]
        out[mr] = warped[mr]
    else:
        wl, wr = feather_weights(ml, mr)
        if left.ndim == 3:
            wl, wr = wl[..., None], wr[..., None]
        acc = wl * left.astype(np.int64) + wr * warped.astype(np.int64) + (WEIGHT_ONE >> 1)
        out = (acc >> WEIGHT_BITS).astype(np.uint8)
    return out


def psnr(a, b, mask=None) -> float:
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    diff = (a - b) ** 2
    if mask is not None:
        diff = diff[np.asarray(mask, bool)]
    mse = float(np.mean(diff))
    return np.inf if mse == 0 else 10.0 * np.log10(255.0 ** 2 / mse)
