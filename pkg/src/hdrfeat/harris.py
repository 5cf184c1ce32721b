"""Harris corner detector and its HDR variant (HfHDR).

HfHDR inserts the CV filter and a logarithmic transform right after the
pre-gradient Gaussian blur; everything downstream is the canonical
detector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .filtering import cv_filter, gaussian_blur, gradients, log_transform
from .image import as_array
from .keypoints import KeyPoint, sort_by_response

MIN_SIZE = 16


@dataclass(frozen=True)
class HarrisParams:
    k: float = 0.04
    blur_sigma: float = 1.0
    tensor_sigma: float = 2.0
    rel_threshold: float = 0.01
    nms_radius: int = 1

    def __post_init__(self):
        if not 0.0 < self.k < 0.25:
            raise ParameterError(f"Harris k must be in (0, 0.25), got {self.k}")
        if not (self.blur_sigma > 0 and self.tensor_sigma > 0):
            raise ParameterError("Harris sigmas must be > 0")
        if not 0.0 < self.rel_threshold < 1.0:
            raise ParameterError("rel_threshold must be in (0, 1)")
        if self.nms_radius < 1:
            raise ParameterError("nms_radius must be >= 1")


def check_size(arr: np.ndarray) -> None:
    h, w = arr.shape
    if h < MIN_SIZE or w < MIN_SIZE:
        raise ParameterError(f"Harris needs at least {MIN_SIZE}x{MIN_SIZE}, got {w}x{h}")


def harris_response(smoothed: np.ndarray, p: HarrisParams) -> np.ndarray:
    """``det(M) - k trace(M)^2`` of the Gaussian-weighted structure tensor.

    ``smoothed`` is the image after the pre-gradient blur (and, for HfHDR,
    after the CV/log stage).
    """
    dx, dy = gradients(smoothed)
    sxx = gaussian_blur(dx * dx, p.tensor_sigma)
    syy = gaussian_blur(dy * dy, p.tensor_sigma)
    sxy = gaussian_blur(dx * dy, p.tensor_sigma)
    return sxx * syy - sxy * sxy - p.k * (sxx + syy) ** 2


def nms_mask(resp: np.ndarray, threshold: float, radius: int) -> np.ndarray:
    """Local maxima above ``threshold`` in a ``(2r+1)^2`` window.

    Plateaus are resolved in raster order: a pixel must strictly beat
    neighbors that come before it (smaller y, or same y and smaller x) and
    tie-or-beat the ones after it, so exactly one pixel of a tied pair
    survives.
    """
    h, w = resp.shape
    p = np.pad(resp, radius, mode="constant", constant_values=-np.inf)
    keep = resp > threshold
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            if dy == 0 and dx == 0:
                continue
            nb = p[radius + dy:radius + dy + h, radius + dx:radius + dx + w]
            if (dy, dx) < (0, 0):
                keep &= resp > nb
            else:
                keep &= resp >= nb
    return keep


def detect_on_working_image(smoothed: np.ndarray, p: HarrisParams) -> list[KeyPoint]:
    """Thresholded, non-maximum-suppressed corners of a prepared working image."""
    resp = harris_response(smoothed, p)
    peak = resp.max()
    if not peak > 0:
        return []
    keep = nms_mask(resp, p.rel_threshold * peak, p.nms_radius)
    ys, xs = np.nonzero(keep)
    kps = [KeyPoint(float(x), float(y), 1.0, 0.0, float(resp[y, x]))
           for y, x in zip(ys, xs)]
    return sort_by_response(kps)


def harris_detect(img, p: HarrisParams = HarrisParams()) -> list[KeyPoint]:
    """Canonical Harris corners, sorted by response (strongest first)."""
    arr = as_array(img)
    check_size(arr)
    return detect_on_working_image(harris_working_image(arr, p), p)


def harris_hdr_detect(img, p: HarrisParams = HarrisParams(), cv_window: int = 5) -> list[KeyPoint]:
    """HfHDR: blur, CV filter, ``ln(1+x)``, then the canonical tensor stage."""
    arr = as_array(img)
    check_size(arr)
    return detect_on_working_image(harris_working_image(arr, p, cv_window), p)


def harris_working_image(img, p: HarrisParams = HarrisParams(), cv_window: int | None = None) -> np.ndarray:
    """Image the tensor stage sees: the blurred input, or its CV/log map when
    ``cv_window`` is given."""
    smoothed = gaussian_blur(as_array(img), p.blur_sigma)
    if cv_window is None:
        return smoothed
    return log_transform(cv_filter(smoothed, cv_window))
