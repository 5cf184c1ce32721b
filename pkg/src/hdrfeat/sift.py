"""Difference-of-Gaussians scale space and the SIFT / SfHDR detectors.

The working image is min-max normalized to [0, 1] before the pyramid is
built, in both the canonical and the HDR branch, so ``contrast_threshold``
has the same meaning for LDR input, HDR radiance and CV/log maps.  There
is no initial 2x upsampling: octave 0 is the native resolution.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .filtering import cv_filter, gaussian_blur, gradients, log_transform, minmax_normalize
from .image import as_array
from .keypoints import KeyPoint, sort_by_response

MIN_SIZE = 32
#: Blur assumed to be present in the input image already.
ASSUMED_BLUR = 0.5
#: Smallest octave side that still leaves room for 3x3x3 extrema.
MIN_OCTAVE_SIZE = 8


@dataclass(frozen=True)
class SiftDetectParams:
    n_octaves: int | None = None  # None: floor(log2(min(w, h))) - 3
    scales_per_octave: int = 3
    base_sigma: float = 1.6
    contrast_threshold: float = 0.03
    edge_ratio: float = 10.0
    max_refine_steps: int = 5

    def __post_init__(self):
        if self.n_octaves is not None and self.n_octaves < 1:
            raise ParameterError("n_octaves must be >= 1")
        if self.scales_per_octave < 1 or self.max_refine_steps < 1:
            raise ParameterError("scales_per_octave and max_refine_steps must be >= 1")
        if not (self.base_sigma > ASSUMED_BLUR and self.contrast_threshold > 0):
            raise ParameterError("base_sigma must exceed 0.5 and contrast_threshold be > 0")
        if not self.edge_ratio > 1:
            raise ParameterError("edge_ratio must be > 1")


@dataclass
class ScaleSpace:
    """Gaussian and DoG pyramids.

    ``gaussians[o]`` has shape ``(s + 3, h_o, w_o)`` and ``dogs[o]`` shape
    ``(s + 2, h_o, w_o)``; octave ``o`` is decimated by ``2**o``.
    """

    gaussians: list[np.ndarray]
    dogs: list[np.ndarray]
    scales_per_octave: int
    base_sigma: float
    image_shape: tuple[int, int]
    _gradients: dict = field(default_factory=dict, repr=False)

    @property
    def n_octaves(self) -> int:
        return len(self.gaussians)

    def sigma(self, octave: int, interval: float) -> float:
        """Effective blur of a level, in input-image pixels."""
        return self.base_sigma * 2.0 ** (octave + interval / self.scales_per_octave)

    def octave_sigma(self, interval: float) -> float:
        """Blur of a level in its own octave's pixel units."""
        return self.base_sigma * 2.0 ** (interval / self.scales_per_octave)

    def nearest_level(self, scale: float) -> tuple[int, int]:
        """``(octave, interval)`` whose effective sigma is closest in log scale."""
        s = self.scales_per_octave
        t = math.log2(max(scale, 1e-12) / self.base_sigma) * s
        best = None
        for o in range(self.n_octaves):
            for i in range(self.gaussians[o].shape[0]):
                d = abs(t - (o * s + i))
                if best is None or d < best[0]:
                    best = (d, o, i)
        return best[1], best[2]

    def level_gradients(self, octave: int, interval: int) -> tuple[np.ndarray, np.ndarray]:
        """Cached central-difference gradients of one Gaussian level."""
        key = (octave, interval)
        if key not in self._gradients:
            self._gradients[key] = gradients(self.gaussians[octave][interval])
        return self._gradients[key]


def default_octaves(shape: tuple[int, int]) -> int:
    return max(1, int(math.floor(math.log2(min(shape)))) - 3)


def build_scale_space(img, p: SiftDetectParams = SiftDetectParams(), normalize: bool = True) -> ScaleSpace:
    """Gaussian pyramid with ``s + 3`` levels per octave and its DoG.

    Each level is blurred directly from its octave base (not incrementally
    from the previous level) so the level sigmas are exact up to kernel
    truncation.  The base of octave ``o + 1`` is level ``s`` of octave ``o``
    sampled at every other pixel.
    """
    arr = as_array(img)
    h, w = arr.shape
    if h < MIN_SIZE or w < MIN_SIZE:
        raise ParameterError(f"scale space needs at least {MIN_SIZE}x{MIN_SIZE}, got {w}x{h}")
    n_oct = p.n_octaves if p.n_octaves is not None else default_octaves(arr.shape)
    if min(h, w) >> (n_oct - 1) < MIN_OCTAVE_SIZE:
        raise ParameterError(f"{n_oct} octaves is too many for a {w}x{h} image")
    s = p.scales_per_octave
    work = minmax_normalize(arr) if normalize else arr
    base = gaussian_blur(work, math.sqrt(p.base_sigma ** 2 - ASSUMED_BLUR ** 2))
    gaussians, dogs = [], []
    for o in range(n_oct):
        levels = [base]
        for i in range(1, s + 3):
            sig = p.base_sigma * 2.0 ** (i / s)
            levels.append(gaussian_blur(base, math.sqrt(sig ** 2 - p.base_sigma ** 2)))
        stack = np.stack(levels)
        gaussians.append(stack)
        dogs.append(stack[1:] - stack[:-1])
        base = stack[s, ::2, ::2]
    return ScaleSpace(gaussians, dogs, s, p.base_sigma, (h, w))


def _derivatives(dog: np.ndarray, i: int, y: int, x: int) -> tuple[np.ndarray, np.ndarray]:
    c = dog[i, y, x]
    g = 0.5 * np.array([dog[i, y, x + 1] - dog[i, y, x - 1],
                        dog[i, y + 1, x] - dog[i, y - 1, x],
                        dog[i + 1, y, x] - dog[i - 1, y, x]])
    dxx = dog[i, y, x + 1] + dog[i, y, x - 1] - 2 * c
    dyy = dog[i, y + 1, x] + dog[i, y - 1, x] - 2 * c
    dss = dog[i + 1, y, x] + dog[i - 1, y, x] - 2 * c
    dxy = 0.25 * (dog[i, y + 1, x + 1] - dog[i, y + 1, x - 1]
                  - dog[i, y - 1, x + 1] + dog[i, y - 1, x - 1])
    dxs = 0.25 * (dog[i + 1, y, x + 1] - dog[i + 1, y, x - 1]
                  - dog[i - 1, y, x + 1] + dog[i - 1, y, x - 1])
    dys = 0.25 * (dog[i + 1, y + 1, x] - dog[i + 1, y - 1, x]
                  - dog[i - 1, y + 1, x] + dog[i - 1, y - 1, x])
    hess = np.array([[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]])
    return g, hess


def passes_edge_test(hess: np.ndarray, edge_ratio: float) -> bool:
    """Principal-curvature test on the spatial 2x2 block of a DoG Hessian."""
    tr = hess[0, 0] + hess[1, 1]
    det = hess[0, 0] * hess[1, 1] - hess[0, 1] ** 2
    return det > 0 and tr * tr / det < (edge_ratio + 1) ** 2 / edge_ratio


def refine_extremum(dog: np.ndarray, i: int, y: int, x: int, p: SiftDetectParams):
    """Iterative quadratic (3-D Taylor) refinement of a DoG extremum.

    Returns ``(i, y, x, offset, value, hessian)`` at the final lattice
    point, or None when the candidate is discarded (no convergence, left
    the octave, singular Hessian, low contrast, or edge-like).
    """
    n, h, w = dog.shape
    for _ in range(p.max_refine_steps):
        g, hess = _derivatives(dog, i, y, x)
        try:
            offset = -np.linalg.solve(hess, g)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(offset)):
            return None
        if np.all(np.abs(offset) <= 0.5):
            break
        x += int(np.round(offset[0]))
        y += int(np.round(offset[1]))
        i += int(np.round(offset[2]))
        if not (1 <= i <= n - 2 and 1 <= y <= h - 2 and 1 <= x <= w - 2):
            return None
    else:
        return None
    value = dog[i, y, x] + 0.5 * float(g @ offset)
    if abs(value) < p.contrast_threshold:
        return None
    if not passes_edge_test(hess, p.edge_ratio):
        return None
    return i, y, x, offset, value, hess


def strict_extrema_mask(arr: np.ndarray) -> np.ndarray:
    """Maxima and minima over the full 3^n neighborhood of an n-D array.

    Ties are resolved in raster order (see :func:`hdrfeat.harris.nms_mask`),
    so a plateau of equal samples yields a single extremum.  Samples on the
    array boundary are never reported.
    """
    pad_hi = np.pad(arr, 1, mode="constant", constant_values=-np.inf)
    pad_lo = np.pad(arr, 1, mode="constant", constant_values=np.inf)
    is_max = np.ones(arr.shape, dtype=bool)
    is_min = np.ones(arr.shape, dtype=bool)
    for off in itertools.product((-1, 0, 1), repeat=arr.ndim):
        if not any(off):
            continue
        sl = tuple(slice(1 + d, 1 + d + n) for d, n in zip(off, arr.shape))
        hi, lo = pad_hi[sl], pad_lo[sl]
        if off < (0,) * arr.ndim:
            is_max &= arr > hi
            is_min &= arr < lo
        else:
            is_max &= arr >= hi
            is_min &= arr <= lo
    mask = is_max | is_min
    for ax in range(arr.ndim):
        idx = [slice(None)] * arr.ndim
        idx[ax] = 0
        mask[tuple(idx)] = False
        idx[ax] = -1
        mask[tuple(idx)] = False
    return mask


def find_extrema(dog: np.ndarray, threshold: float) -> np.ndarray:
    """Lattice points ``(i, y, x)`` that are extrema of their 3x3x3
    neighborhood in the interior of a DoG octave, with |D| > threshold."""
    return np.argwhere(strict_extrema_mask(dog) & (np.abs(dog) > threshold))


def detect_in_scale_space(ss: ScaleSpace, p: SiftDetectParams) -> list[KeyPoint]:
    s = ss.scales_per_octave
    best: dict[tuple[int, int, float], KeyPoint] = {}
    for o, dog in enumerate(ss.dogs):
        factor = 2.0 ** o
        for i0, y0, x0 in find_extrema(dog, 0.5 * p.contrast_threshold):
            res = refine_extremum(dog, int(i0), int(y0), int(x0), p)
            if res is None:
                continue
            i, y, x, off, value, _ = res
            kp = KeyPoint(
                x=float((x + off[0]) * factor),
                y=float((y + off[1]) * factor),
                scale=float(ss.sigma(o, i + off[2])),
                response=abs(float(value)),
                octave=o,
                layer=i,
            )
            h, w = ss.image_shape
            if not (0 <= kp.x < w and 0 <= kp.y < h):
                continue
            key = (round(kp.x), round(kp.y), round(kp.scale, 2))
            if key not in best or kp.response > best[key].response:
                best[key] = kp
    return sort_by_response(best.values())


def sift_working_image(img, cv_window: int | None = None) -> np.ndarray:
    """Input to the pyramid: the image itself, or ``ln(1 + CV(image))``."""
    arr = as_array(img)
    if cv_window is None:
        return arr
    return log_transform(cv_filter(arr, cv_window))


def sift_detect(img, p: SiftDetectParams = SiftDetectParams()) -> list[KeyPoint]:
    """DoG keypoints with subpixel refinement and edge rejection."""
    return detect_in_scale_space(build_scale_space(img, p), p)


def sift_hdr_detect(img, p: SiftDetectParams = SiftDetectParams(), cv_window: int = 5) -> list[KeyPoint]:
    """SfHDR: CV filter and ``ln(1+x)`` before the scale space is built."""
    return sift_detect(sift_working_image(img, cv_window), p)
