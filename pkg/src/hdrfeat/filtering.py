"""Shared filter kernels: Gaussian blur, gradients, CV filter, log transform.

All functions take a FloatImage or a 2-D array and return a float64
array of the same shape.  Borders are handled by edge-clamp replication
everywhere (``mode="nearest"`` in scipy terms).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DataError, ParameterError
from .image import as_array


@dataclass(frozen=True)
class KernelSpec:
    """Sampled, normalized 1-D Gaussian."""

    sigma: float
    radius: int

    @classmethod
    def for_sigma(cls, sigma: float) -> "KernelSpec":
        if not sigma > 0:
            raise ParameterError(f"sigma must be > 0, got {sigma}")
        return cls(float(sigma), int(math.ceil(3.0 * sigma)))

    @property
    def weights(self) -> np.ndarray:
        return gaussian_kernel(self.sigma, self.radius)


def gaussian_kernel(sigma: float, radius: int | None = None) -> np.ndarray:
    """Normalized 1-D Gaussian of length ``2*radius + 1``.

    ``radius`` defaults to ``ceil(3*sigma)``.
    """
    if not sigma > 0:
        raise ParameterError(f"sigma must be > 0, got {sigma}")
    if radius is None:
        radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def convolve_separable(img, kernel: np.ndarray) -> np.ndarray:
    """Apply a symmetric 1-D kernel along both axes with edge clamping."""
    arr = as_array(img)
    out = ndimage.correlate1d(arr, kernel, axis=0, mode="nearest")
    return ndimage.correlate1d(out, kernel, axis=1, mode="nearest")


def gaussian_blur(img, sigma: float) -> np.ndarray:
    """Separable Gaussian blur, kernel radius ``ceil(3*sigma)``."""
    return convolve_separable(img, gaussian_kernel(sigma))


def gradients(img) -> tuple[np.ndarray, np.ndarray]:
    """Central differences ``(I[x+1] - I[x-1]) / 2`` along x and y."""
    arr = as_array(img)
    h, w = arr.shape
    if h < 3 or w < 3:
        raise ParameterError(f"gradients need an image of at least 3x3, got {w}x{h}")
    p = np.pad(arr, 1, mode="edge")
    dx = (p[1:-1, 2:] - p[1:-1, :-2]) * 0.5
    dy = (p[2:, 1:-1] - p[:-2, 1:-1]) * 0.5
    return dx, dy


def cv_filter(img, window: int = 5) -> np.ndarray:
    """Local coefficient of variation ``sigma / mu`` over a square window.

    Uses the population standard deviation (divide by n).  Windows whose
    mean is zero, and windows holding a single repeated value, produce
    exactly 0.

    Deviations are taken around the local mean and divided by it before
    squaring (rather than ``E[x^2] - E[x]^2``), which keeps low-contrast
    windows accurate, avoids underflow for tiny values and keeps the
    result invariant to a positive rescaling of the input.
    """
    if window < 3 or window % 2 == 0:
        raise ParameterError(f"CV window must be odd and >= 3, got {window}")
    arr = as_array(img)
    if arr.size and arr.min() < 0:
        raise DataError("CV filter needs non-negative input")
    r = window // 2
    h, w = arr.shape
    p = np.pad(arr, r, mode="edge")
    n = window * window
    offsets = [(dy, dx) for dy in range(window) for dx in range(window)]

    mean = np.zeros_like(arr)
    for dy, dx in offsets:
        mean += p[dy:dy + h, dx:dx + w]
    mean /= n
    # squared deviations relative to the mean stay O(1), so tiny inputs
    # do not underflow
    safe = np.where(mean > 0, mean, 1.0)
    rel_var = np.zeros_like(arr)
    for dy, dx in offsets:
        d = (p[dy:dy + h, dx:dx + w] - mean) / safe
        rel_var += d * d
    rel_var /= n

    size = (window, window)
    flat = (ndimage.maximum_filter(arr, size=size, mode="nearest")
            == ndimage.minimum_filter(arr, size=size, mode="nearest"))
    out = np.zeros_like(arr)
    ok = (mean > 0) & ~flat
    out[ok] = np.sqrt(rel_var[ok])
    return out


def log_transform(img) -> np.ndarray:
    """``ln(1 + x)``; maps 0 to 0 and preserves ordering."""
    arr = as_array(img)
    if np.isnan(arr).any() or (arr.size and arr.min() < 0):
        raise DataError("log transform needs non-negative input")
    return np.log1p(arr)


def minmax_normalize(img) -> np.ndarray:
    """Affinely map the image onto [0, 1]; a constant image maps to zeros."""
    arr = as_array(img)
    lo, hi = arr.min(), arr.max()
    if hi > lo:
        return (arr - lo) / (hi - lo)
    return np.zeros_like(arr)
