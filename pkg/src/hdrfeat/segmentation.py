"""Luminance map and intensity-tercile segmentation.

The luminance map is a wide Gaussian blur of the image (a single-scale
Retinex illumination estimate).  The foreground of a scene is then split
into dark, mid and bright thirds by cutting the cumulative histogram of
its luminance, which gives the groups the uniformity metric counts over.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParameterError
from .filtering import convolve_separable, gaussian_kernel
from .image import as_array, read_pgm_u8, save_pgm

N_BINS = 4096
BACKGROUND, DARK, MID, BRIGHT = 0, 1, 2, 3
#: Gray level written for each label in mask PGMs.
PGM_LEVELS = (0, 85, 170, 255)


def kernel_side(width: int, height: int, alpha: float = 0.007) -> int:
    """Smallest odd integer strictly greater than ``6 * alpha * max(w, h)``."""
    if not alpha > 0:
        raise ParameterError(f"alpha must be > 0, got {alpha}")
    # round off float noise so that e.g. 6 * 0.007 * 1500 counts as exactly 63
    six_r = round(6.0 * alpha * max(width, height), 9)
    side = math.floor(six_r) + 1
    return side if side % 2 else side + 1


def luminance_map(img, alpha: float = 0.007) -> np.ndarray:
    """``L = I * G_r`` with ``r = alpha * max(w, h)`` and an edge-clamped
    Gaussian of sigma ``r`` truncated to :func:`kernel_side` samples."""
    arr = as_array(img)
    h, w = arr.shape
    side = kernel_side(w, h, alpha)
    r = alpha * max(w, h)
    return convolve_separable(arr, gaussian_kernel(r, (side - 1) // 2))


@dataclass(frozen=True)
class RoiMask:
    """Boolean foreground mask (True = foreground)."""

    foreground: np.ndarray

    def __post_init__(self):
        fg = np.asarray(self.foreground, dtype=bool)
        if fg.ndim != 2:
            raise DataError("ROI mask must be 2-D")
        object.__setattr__(self, "foreground", fg)

    @classmethod
    def full(cls, shape) -> "RoiMask":
        return cls(np.ones(shape, dtype=bool))

    @classmethod
    def from_pgm(cls, path) -> "RoiMask":
        """8-bit PGM, 0 = background and anything else foreground."""
        return cls(read_pgm_u8(path) != 0)

    @property
    def shape(self) -> tuple[int, int]:
        return self.foreground.shape


@dataclass(frozen=True)
class IntensityMask:
    """Per-pixel labels: 0 background, 1 dark, 2 mid, 3 bright."""

    labels: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 2:
            raise DataError("intensity mask must be 2-D")
        if lab.size and (lab.min() < 0 or lab.max() > BRIGHT):
            raise DataError("intensity labels must be in 0..3")
        object.__setattr__(self, "labels", lab.astype(np.uint8))

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    def counts(self) -> tuple[int, int, int]:
        """Pixels in the dark, mid and bright groups."""
        c = np.bincount(self.labels.ravel(), minlength=4)
        return int(c[DARK]), int(c[MID]), int(c[BRIGHT])

    def save_pgm(self, path) -> None:
        save_pgm(path, np.asarray(PGM_LEVELS, dtype=np.uint8)[self.labels])

    @classmethod
    def from_pgm(cls, path) -> "IntensityMask":
        """Read an indexed mask PGM (levels 0/85/170/255)."""
        raw = read_pgm_u8(path)
        lut = np.full(256, 255, dtype=np.int16)
        for label, level in enumerate(PGM_LEVELS):
            lut[level] = label
        labels = lut[raw]
        if (labels == 255).any():
            bad = sorted(set(np.unique(raw)) - set(PGM_LEVELS))
            raise DataError(f"{path}: unexpected mask levels {bad[:5]}")
        return cls(labels)


def tercile_cuts(bins: np.ndarray, n_bins: int = N_BINS) -> tuple[int, int]:
    """Bin cuts ``(c1, c2)``: dark is ``bin < c1``, bright is ``bin >= c2``.

    Each cut is the first position where the cumulative count is closest
    to one third (two thirds) of the total.
    """
    hist = np.bincount(bins, minlength=n_bins)
    below = np.concatenate([[0], np.cumsum(hist)])  # pixels in bins < c
    n = len(bins)
    c1 = int(np.argmin(np.abs(3 * below - n)))
    c2 = int(np.argmin(np.abs(3 * below - 2 * n)))
    return c1, max(c1, c2)


def segment_terciles(lum, roi: RoiMask | None = None, n_bins: int = N_BINS) -> IntensityMask:
    """Split the foreground into dark / mid / bright luminance thirds.

    Foreground luminance is quantized into ``n_bins`` bins spanning its
    [min, max] and the cumulative histogram is cut near 1/3 and 2/3 of the
    foreground count.  Pixels sharing a bin always share a label, so
    heavy ties can unbalance the groups.  A constant foreground cannot be
    split: every pixel is labeled dark and a warning is emitted.
    """
    arr = as_array(lum)
    fg = np.ones(arr.shape, dtype=bool) if roi is None else roi.foreground
    if fg.shape != arr.shape:
        raise DataError(f"ROI shape {fg.shape} does not match image shape {arr.shape}")
    values = arr[fg]
    if values.size == 0:
        raise DataError("ROI has no foreground pixels")
    labels = np.zeros(arr.shape, dtype=np.uint8)
    lo, hi = values.min(), values.max()
    if not hi > lo:
        warnings.warn("constant foreground luminance; all pixels labeled dark", RuntimeWarning)
        labels[fg] = DARK
        return IntensityMask(labels)
    bins = np.minimum(((values - lo) / (hi - lo) * n_bins).astype(np.int64), n_bins - 1)
    c1, c2 = tercile_cuts(bins, n_bins)
    labels[fg] = np.where(bins < c1, DARK, np.where(bins < c2, MID, BRIGHT))
    return IntensityMask(labels)
