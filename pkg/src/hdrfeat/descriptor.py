"""Orientation assignment and the 128-D SIFT descriptor.

Works with keypoints from any detector: SIFT/SfHDR keypoints are
described on the pyramid they were detected in; Harris-family keypoints
(scale 1.0) are described on a small single-octave pyramid built with
:func:`build_mini_scale_space`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .filtering import gaussian_blur, minmax_normalize
from .image import as_array
from .keypoints import KeyPoint
from .sift import ASSUMED_BLUR, ScaleSpace

N_ORI_BINS = 36
PEAK_RATIO = 0.8
ORI_SIGMA_FACTOR = 1.5
DESC_GRID = 16  # samples per side
DESC_CELLS = 4
DESC_ORI_BINS = 8
CELL_WIDTH_FACTOR = 3.0  # cell side in units of the keypoint sigma
CLAMP = 0.2
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Descriptor:
    vector: np.ndarray  # float32, length 128
    keypoint: KeyPoint


class DescriptorList(list):
    """List of descriptors; ``dropped`` counts undescribable keypoints."""

    def __init__(self, items=(), dropped: int = 0):
        super().__init__(items)
        self.dropped = dropped


def _round(v: float) -> int:
    return int(math.floor(v + 0.5))


def build_mini_scale_space(img, base_sigma: float = 1.6, normalize: bool = True) -> ScaleSpace:
    """Two Gaussian levels at native resolution, for single-scale keypoints."""
    arr = as_array(img)
    if min(arr.shape) < 3:
        raise ParameterError("image too small to describe")
    work = minmax_normalize(arr) if normalize else arr
    g0 = gaussian_blur(work, math.sqrt(base_sigma ** 2 - ASSUMED_BLUR ** 2))
    # one interval of the default s=3 octave
    g1 = gaussian_blur(g0, base_sigma * math.sqrt(2.0 ** (2.0 / 3.0) - 1.0))
    stack = np.stack([g0, g1])
    return ScaleSpace([stack], [stack[1:] - stack[:-1]], 3, base_sigma, arr.shape)


def orientation_peaks(hist: np.ndarray, ratio: float = PEAK_RATIO) -> list[float]:
    """Dominant angles (radians) of a circular orientation histogram.

    A bin qualifies when it is a local maximum (strictly above its left
    neighbor, not below its right one) and at least ``ratio`` of the
    global maximum.  The angle is refined by a parabola through the bin
    and its two neighbors.  Bin ``k`` is centered on ``k * 2*pi/n``.
    """
    n = len(hist)
    top = hist.max()
    if not top > 0:
        return []
    angles = []
    for k in range(n):
        c, left, right = hist[k], hist[k - 1], hist[(k + 1) % n]
        if c > left and c >= right and c >= ratio * top:
            denom = left - 2 * c + right
            off = 0.5 * (left - right) / denom if denom != 0 else 0.0
            angles.append(((k + off) * TWO_PI / n) % TWO_PI)
    return angles


def orientation_histogram(ss: ScaleSpace, kp: KeyPoint) -> np.ndarray | None:
    """36-bin Gaussian-weighted gradient histogram, or None when the
    sampling window leaves the level image."""
    o, i = ss.nearest_level(kp.scale)
    f = 2.0 ** o
    xo, yo, sig = kp.x / f, kp.y / f, ORI_SIGMA_FACTOR * kp.scale / f
    radius = _round(3.0 * sig)
    cx, cy = _round(xo), _round(yo)
    gx, gy = ss.level_gradients(o, i)
    h, w = gx.shape
    if cx - radius < 0 or cy - radius < 0 or cx + radius >= w or cy + radius >= h:
        return None
    ys, xs = np.mgrid[cy - radius:cy + radius + 1, cx - radius:cx + radius + 1]
    wx, wy = gx[ys, xs], gy[ys, xs]
    weight = np.exp(-((xs - xo) ** 2 + (ys - yo) ** 2) / (2.0 * sig * sig))
    mag = np.hypot(wx, wy) * weight
    ang = np.arctan2(wy, wx) % TWO_PI
    bins = np.floor(ang * N_ORI_BINS / TWO_PI + 0.5).astype(int) % N_ORI_BINS
    return np.bincount(bins.ravel(), weights=mag.ravel(), minlength=N_ORI_BINS)


def assign_orientation(ss: ScaleSpace, kp: KeyPoint) -> list[KeyPoint]:
    """One oriented copy of ``kp`` per dominant gradient direction."""
    hist = orientation_histogram(ss, kp)
    if hist is None:
        return []
    return [kp.with_orientation(a) for a in orientation_peaks(hist)]


def _bilinear(img: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    h, w = img.shape
    x = np.clip(x, 0, w - 1)
    y = np.clip(y, 0, h - 1)
    x0 = np.minimum(np.floor(x).astype(int), w - 2) if w > 1 else np.zeros_like(x, int)
    y0 = np.minimum(np.floor(y).astype(int), h - 2) if h > 1 else np.zeros_like(y, int)
    fx, fy = x - x0, y - y0
    x1, y1 = np.minimum(x0 + 1, w - 1), np.minimum(y0 + 1, h - 1)
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    return top * (1 - fy) + bot * fy


# sample-grid geometry shared by every keypoint
_idx = np.arange(DESC_GRID) - (DESC_GRID - 1) / 2.0
_V, _U = np.meshgrid(_idx, _idx, indexing="ij")  # rows, cols
_GAUSS = np.exp(-(_U ** 2 + _V ** 2) / (2.0 * (DESC_GRID / 2.0) ** 2))
_CELL = DESC_GRID // DESC_CELLS
_RB = (np.arange(DESC_GRID) + 0.5) / _CELL - 0.5
_ROW_BIN, _COL_BIN = np.meshgrid(_RB, _RB, indexing="ij")


def raw_histogram(ss: ScaleSpace, kp: KeyPoint) -> np.ndarray:
    """Unnormalized 4x4x8 histogram (flattened row, column, orientation)."""
    o, i = ss.nearest_level(kp.scale)
    f = 2.0 ** o
    xo, yo = kp.x / f, kp.y / f
    step = CELL_WIDTH_FACTOR * (kp.scale / f) / _CELL
    c, s = math.cos(kp.orientation), math.sin(kp.orientation)
    u, v = _U * step, _V * step
    px = xo + c * u - s * v
    py = yo + s * u + c * v
    gx, gy = ss.level_gradients(o, i)
    sx, sy = _bilinear(gx, px, py), _bilinear(gy, px, py)
    mag = np.hypot(sx, sy) * _GAUSS
    rel = (np.arctan2(sy, sx) - kp.orientation) % TWO_PI
    ob = rel * DESC_ORI_BINS / TWO_PI

    hist = np.zeros((DESC_CELLS + 2, DESC_CELLS + 2, DESC_ORI_BINS))
    r0 = np.floor(_ROW_BIN).astype(int)
    c0 = np.floor(_COL_BIN).astype(int)
    o0 = np.floor(ob).astype(int)
    dr, dc, do = _ROW_BIN - r0, _COL_BIN - c0, ob - o0
    for rr, wr in ((r0, 1 - dr), (r0 + 1, dr)):
        for cc, wc in ((c0, 1 - dc), (c0 + 1, dc)):
            for oo, wo in ((o0, 1 - do), (o0 + 1, do)):
                # +1 shifts into the padded border that absorbs spill-over
                np.add.at(hist, (rr + 1, cc + 1, oo % DESC_ORI_BINS), mag * wr * wc * wo)
    return hist[1:-1, 1:-1].ravel()


def normalize_descriptor(vec: np.ndarray) -> np.ndarray | None:
    """Unit-normalize, clamp at 0.2, renormalize.  None for a zero vector."""
    n = np.linalg.norm(vec)
    if not n > 0:
        return None
    vec = np.minimum(vec / n, CLAMP)
    return vec / np.linalg.norm(vec)


def describe(ss: ScaleSpace, kps) -> DescriptorList:
    """SIFT descriptors for oriented keypoints, in input order.

    Keypoints whose window has no gradient energy are dropped and counted
    in ``result.dropped``.
    """
    out = DescriptorList()
    for kp in kps:
        vec = normalize_descriptor(raw_histogram(ss, kp))
        if vec is None:
            out.dropped += 1
            continue
        out.append(Descriptor(vec.astype(np.float32), kp))
    return out


def orient_and_describe(ss: ScaleSpace, kps) -> DescriptorList:
    """Orientation assignment followed by description."""
    oriented = [o for kp in kps for o in assign_orientation(ss, kp)]
    return describe(ss, oriented)
