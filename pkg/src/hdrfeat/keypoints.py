"""Feature-point record and its canonical ordering."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class KeyPoint:
    """A detected feature point.

    ``x``/``y`` are in the input image frame (origin top-left, pixel
    centers on integers).  ``scale`` is the Gaussian sigma in image pixels
    (1.0 for single-scale detectors), ``orientation`` is in radians in
    [0, 2*pi).  ``octave`` and ``layer`` record where a scale-space
    detector found the point; single-scale detectors leave them at 0.
    """

    x: float
    y: float
    scale: float = 1.0
    orientation: float = 0.0
    response: float = 0.0
    octave: int = 0
    layer: int = 0

    def with_orientation(self, angle: float) -> "KeyPoint":
        return replace(self, orientation=float(angle) % (2.0 * math.pi))


def response_order(kp: KeyPoint) -> tuple[float, float, float]:
    """Sort key: response descending, then y ascending, then x ascending."""
    return (-kp.response, kp.y, kp.x)


def sort_by_response(kps) -> list[KeyPoint]:
    return sorted(kps, key=response_order)


def quantize(kp: KeyPoint, decimals: int = 6) -> KeyPoint:
    """Round the float fields the way the keypoint CSV stores them.

    Used by the benchmark so that in-memory results equal a round trip
    through the CSV files.
    """
    def q(v: float) -> float:
        return float(f"{v:.{decimals}f}")

    return replace(kp, x=q(kp.x), y=q(kp.y), scale=q(kp.scale),
                   orientation=q(kp.orientation) % (2.0 * math.pi),
                   response=q(kp.response))
