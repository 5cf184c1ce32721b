"""Nearest-neighbor distance-ratio (NNDR) matching."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParameterError


@dataclass(frozen=True)
class Match:
    index_a: int
    index_b: int
    distance: float  # to the nearest neighbor
    ratio: float  # d1 / d2


def _as_matrix(descs) -> np.ndarray:
    if isinstance(descs, np.ndarray):
        return np.atleast_2d(descs).astype(np.float64)
    rows = [d.vector if hasattr(d, "vector") else d for d in descs]
    if not rows:
        return np.zeros((0, 0))
    return np.asarray(rows, dtype=np.float64)


def nearest_two(a, b) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """For every row of ``a``: index of the nearest row of ``b``, and the
    nearest and second-nearest Euclidean distances.

    Ties for the nearest neighbor go to the lower index in ``b``.
    """
    A, B = _as_matrix(a), _as_matrix(b)
    if len(B) < 2:
        raise ParameterError("NNDR needs at least two candidate descriptors")
    if len(A) and A.shape[1] != B.shape[1]:
        raise DataError(f"descriptor dimensions differ: {A.shape[1]} vs {B.shape[1]}")
    n = len(A)
    nn = np.zeros(n, dtype=int)
    d1 = np.zeros(n)
    d2 = np.zeros(n)
    chunk = max(1, 2_000_000 // max(1, B.size))
    for start in range(0, n, chunk):
        blk = A[start:start + chunk]
        # exact differences, not the |a|^2 - 2ab + |b|^2 expansion, so that
        # identical vectors give a distance of exactly zero
        dist = np.sqrt(((blk[:, None, :] - B[None, :, :]) ** 2).sum(axis=2))
        order = np.argsort(dist, axis=1, kind="stable")[:, :2]
        rows = np.arange(len(blk))
        nn[start:start + len(blk)] = order[:, 0]
        d1[start:start + len(blk)] = dist[rows, order[:, 0]]
        d2[start:start + len(blk)] = dist[rows, order[:, 1]]
    return nn, d1, d2


def nndr_ratios(d1: np.ndarray, d2: np.ndarray) -> np.ndarray:
    """``d1 / d2``, with the ratio defined as 1.0 when ``d2 == 0``."""
    out = np.ones_like(d1)
    ok = d2 > 0
    out[ok] = d1[ok] / d2[ok]
    return out


def match_nndr(a, b, th: float = 0.7) -> list[Match]:
    """One-directional matches ``a -> b`` accepted when ``d1/d2 < th``."""
    if not 0.0 < th <= 1.0:
        raise ParameterError(f"NNDR threshold must be in (0, 1], got {th}")
    nn, d1, d2 = nearest_two(a, b)
    ratio = nndr_ratios(d1, d2)
    return [Match(int(i), int(nn[i]), float(d1[i]), float(ratio[i]))
            for i in np.flatnonzero(ratio < th)]
