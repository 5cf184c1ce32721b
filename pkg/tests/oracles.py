"""Independent brute-force reference implementations.

Written in plain Python (loops, ``fractions``, ``statistics``) and
sharing no code with the package, so agreement with the package is
evidence rather than tautology.
"""

from __future__ import annotations

import math
import statistics
from fractions import Fraction


def cv_window(values) -> float:
    """sigma / mu of a flat list (population sigma); 0 for mu == 0 or constant."""
    mu = statistics.fmean(values)
    if mu == 0 or max(values) == min(values):
        return 0.0
    return statistics.pstdev(values) / mu


def cv_pixel(img, window: int, y: int, x: int) -> float:
    """CV of the edge-clamped window centered on pixel (x, y)."""
    h, w = len(img), len(img[0])
    r = window // 2
    vals = [img[min(max(y + dy, 0), h - 1)][min(max(x + dx, 0), w - 1)]
            for dy in range(-r, r + 1) for dx in range(-r, r + 1)]
    return cv_window(vals)


def cv_image(img, window: int):
    """CV at every pixel with edge-clamped windows, as nested lists."""
    return [[cv_pixel(img, window, y, x) for x in range(len(img[0]))] for y in range(len(img))]


def greedy_pairs(pa, pb, eps: float):
    """Repeatedly take the globally closest unused pair within eps.

    Ties go to the lowest index in ``pa``, then ``pb``.
    """
    used_a, used_b, pairs = set(), set(), []
    while True:
        best = None
        for i, a in enumerate(pa):
            if i in used_a:
                continue
            for j, b in enumerate(pb):
                if j in used_b:
                    continue
                d = math.dist(a, b)
                if d <= eps and (best is None or (d, i, j) < best):
                    best = (d, i, j)
        if best is None:
            return pairs
        used_a.add(best[1])
        used_b.add(best[2])
        pairs.append((best[1], best[2]))


def repeatability(pa, pb, eps: float, M: int) -> Fraction:
    pa, pb = pa[:M], pb[:M]
    denom = min(len(pa), len(pb), M)
    if denom == 0:
        return Fraction(0)
    return Fraction(len(greedy_pairs(pa, pb, eps)), denom)


def summarized_rr(rr_by_pair: dict, n: int) -> Fraction:
    total = sum((Fraction(rr_by_pair[(i, j)]) for i in range(n) for j in range(i + 1, n)),
                Fraction(0))
    return total / sum(range(1, n))


def uniformity(counts) -> Fraction:
    t = sum(counts)
    if t == 0:
        return Fraction(0)
    return 1 - (Fraction(max(counts), t) - Fraction(min(counts), t))


def nndr(a, b):
    """For each row of a: (nearest index, d1, d2) by exhaustive search."""
    out = []
    for va in a:
        ds = [math.dist(va, vb) for vb in b]
        order = sorted(range(len(b)), key=lambda j: (ds[j], j))
        out.append((order[0], ds[order[0]], ds[order[1]]))
    return out


def matches_at(a, b, th: float, nn=None):
    res = []
    for i, (j, d1, d2) in enumerate(nn if nn is not None else nndr(a, b)):
        ratio = d1 / d2 if d2 > 0 else 1.0
        if ratio < th:
            res.append((i, j))
    return res


def counts(matches, pa, pb, eps: float, gt=None):
    """(tp, fp, fn) of index matches given mapped positions pa and targets pb."""
    tp = sum(1 for i, j in matches if math.dist(pa[i], pb[j]) <= eps)
    fp = len(matches) - tp
    if gt is None:
        gt = greedy_pairs(pa, pb, eps)
    accepted = set(matches)
    fn = sum(1 for pair in gt if pair not in accepted)
    return tp, fp, fn


def precision_recall(tp, fp, fn):
    p = Fraction(tp, tp + fp) if tp + fp else Fraction(0)
    r = Fraction(tp, tp + fn) if tp + fn else Fraction(0)
    return p, r


def pr_points(a, b, pa, pb, eps, thresholds):
    """Exhaustive sweep: one (recall, precision) per threshold that accepts
    at least one match."""
    pts = []
    nn = nndr(a, b)
    gt = greedy_pairs(pa, pb, eps)
    for th in thresholds:
        m = matches_at(a, b, th, nn)
        if not m:
            continue
        p, r = precision_recall(*counts(m, pa, pb, eps, gt))
        pts.append((float(r), float(p)))
    return pts


def curve_area(points, cells: int = 200_000) -> float:
    """Area under the precision/recall polyline by a fine midpoint
    rectangle sum (numpy only evaluates the polyline).

    Duplicate recalls keep their best precision; the curve is held flat
    from its first point back to recall 0.
    """
    import numpy as np

    best = {}
    for r, p in points:
        best[r] = max(p, best.get(r, 0.0))
    if not best:
        return 0.0
    rs = sorted(best)
    if rs[0] > 0:
        best[0.0] = best[rs[0]]
        rs.insert(0, 0.0)
    if len(rs) == 1:
        return 0.0
    step = (rs[-1] - rs[0]) / cells
    mids = rs[0] + (np.arange(cells) + 0.5) * step
    heights = np.interp(mids, rs, [best[r] for r in rs])
    return float(heights.sum() * step)
