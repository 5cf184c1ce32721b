"""Detection and description metrics.

* repeatability (RR) and its all-pairs mean (sRR)
* uniformity rate (UR) over dark / mid / bright foreground groups
* precision / recall from NNDR matches, average precision (AP) over an
  NNDR threshold sweep, and matching rate

Ground truth is geometric: a keypoint repeats, and a match is correct,
when the mapped position lands within ``epsilon`` pixels of its
counterpart.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DataError, ParameterError
from .matching import Match, nearest_two, nndr_ratios

#: NNDR thresholds swept by :func:`average_precision`.
AP_THRESHOLDS = tuple(round(0.01 * k, 2) for k in range(1, 101))


@dataclass(frozen=True)
class Correspondence:
    """Point mapping from one capture's frame into another's.

    ``homography`` is a 3x3 matrix acting on ``(x, y, 1)``; None means the
    identity (fixed camera).
    """

    homography: np.ndarray | None = None
    epsilon: float = 1.5

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ParameterError("epsilon must be > 0")
        if self.homography is not None:
            H = np.asarray(self.homography, dtype=np.float64).reshape(3, 3)
            if not abs(np.linalg.det(H)) > 1e-12:
                raise ParameterError("homography is not invertible")
            object.__setattr__(self, "homography", H)

    @classmethod
    def identity(cls, epsilon: float = 1.5) -> "Correspondence":
        return cls(None, epsilon)

    def map_points(self, xy: np.ndarray) -> np.ndarray:
        xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
        if self.homography is None:
            return xy.copy()
        ph = np.column_stack([xy, np.ones(len(xy))]) @ self.homography.T
        return ph[:, :2] / ph[:, 2:3]

    def inverse(self) -> "Correspondence":
        H = None if self.homography is None else np.linalg.inv(self.homography)
        return Correspondence(H, self.epsilon)


def _xy(kps) -> np.ndarray:
    return np.array([(k.x, k.y) for k in kps], dtype=np.float64).reshape(-1, 2)


def greedy_pairs(kps_a, kps_b, c: Correspondence) -> list[tuple[int, int]]:
    """One-to-one pairing of mapped ``kps_a`` with ``kps_b``.

    Candidate pairs within ``epsilon`` are taken nearest-first (ties by
    index in a, then b); each keypoint is used at most once.
    """
    if not len(kps_a) or not len(kps_b):
        return []
    pa = c.map_points(_xy(kps_a))
    pb = _xy(kps_b)
    dist = np.sqrt(((pa[:, None, :] - pb[None, :, :]) ** 2).sum(axis=2))
    ia, ib = np.nonzero(dist <= c.epsilon)
    order = np.lexsort((ib, ia, dist[ia, ib]))
    used_a, used_b = set(), set()
    pairs = []
    for k in order:
        i, j = int(ia[k]), int(ib[k])
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        pairs.append((i, j))
    return pairs


def repeatability(kr, kt, c: Correspondence, M: int = 500) -> float:
    """``R_rt / min(n_r, n_t, M)``.

    Only the first ``M`` keypoints of each list (the strongest, for
    response-sorted lists) take part, which keeps RR within [0, 1].  An
    empty list gives 0.
    """
    return float(_repeat_fraction(kr, kt, c, M))


def _repeat_fraction(kr, kt, c: Correspondence, M: int) -> Fraction:
    if M < 1:
        raise ParameterError("M must be >= 1")
    kr, kt = list(kr)[:M], list(kt)[:M]
    denom = min(len(kr), len(kt), M)
    if denom == 0:
        return Fraction(0)
    return Fraction(len(greedy_pairs(kr, kt, c)), denom)


PairCorrespondence = Callable[[int, int], Correspondence]


def summarized_rr(all_kps, c: Correspondence | PairCorrespondence, M: int = 500) -> float:
    """Mean RR over every unordered pair ``i < j`` of captures.

    ``c`` is either one Correspondence used for all pairs or a callable
    ``(i, j) -> Correspondence`` mapping capture i into capture j.  The
    sum is exact (rational) and rounded once.
    """
    n = len(all_kps)
    if n < 2:
        raise ParameterError("sRR needs at least two captures")
    get = c if callable(c) else (lambda i, j: c)
    total = sum((_repeat_fraction(all_kps[i], all_kps[j], get(i, j), M)
                 for i, j in itertools.combinations(range(n), 2)), Fraction(0))
    return float(total / (n * (n - 1) // 2))


def group_counts(kps, mask) -> np.ndarray:
    """Keypoints per foreground group (dark, mid, bright); background excluded.

    ``mask`` is an IntensityMask or a label array (0 background, 1..3).
    A keypoint belongs to the pixel containing its rounded position.
    """
    labels = np.asarray(getattr(mask, "labels", mask))
    h, w = labels.shape
    counts = np.zeros(3, dtype=int)
    for k in kps:
        x, y = int(np.floor(k.x + 0.5)), int(np.floor(k.y + 0.5))
        if not (0 <= x < w and 0 <= y < h):
            raise DataError(f"keypoint ({k.x}, {k.y}) lies outside the {w}x{h} mask")
        lab = labels[y, x]
        if lab:
            counts[lab - 1] += 1
    return counts


def uniformity_from_counts(counts) -> float:
    """``1 - (max a_i/T - min a_i/T)``; 0 when ``T == 0``.

    Evaluated as the single ratio ``(T - max + min) / T`` so the result is
    the correctly rounded exact value.
    """
    counts = [int(a) for a in counts]
    total = sum(counts)
    if total == 0:
        return 0.0
    return (total - max(counts) + min(counts)) / total


def uniformity(kps, mask) -> float:
    return uniformity_from_counts(group_counts(kps, mask))


@dataclass(frozen=True)
class MatchCounts:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        n = self.tp + self.fp
        return self.tp / n if n else 0.0

    @property
    def recall(self) -> float:
        n = self.tp + self.fn
        return self.tp / n if n else 0.0


def match_is_correct(kps_a, kps_b, ia: int, ib: int, c: Correspondence) -> bool:
    p = c.map_points(np.array([[kps_a[ia].x, kps_a[ia].y]]))[0]
    return bool(np.hypot(p[0] - kps_b[ib].x, p[1] - kps_b[ib].y) <= c.epsilon)


def _check_indices(matches, na: int, nb: int) -> None:
    for m in matches:
        if not (0 <= m.index_a < na and 0 <= m.index_b < nb):
            raise DataError(f"match ({m.index_a}, {m.index_b}) is out of range")


def evaluate_matches(matches: list[Match], kps_a, kps_b, c: Correspondence) -> MatchCounts:
    """tp/fp by spatial correctness of accepted matches; fn = ground-truth
    pairs (greedy pairing) that no accepted match reproduces."""
    kps_a, kps_b = list(kps_a), list(kps_b)
    _check_indices(matches, len(kps_a), len(kps_b))
    tp = sum(match_is_correct(kps_a, kps_b, m.index_a, m.index_b, c) for m in matches)
    accepted = {(m.index_a, m.index_b) for m in matches}
    gt = greedy_pairs(kps_a, kps_b, c)
    fn = sum(1 for pair in gt if pair not in accepted)
    return MatchCounts(tp, len(matches) - tp, fn)


def matching_rate(matches: list[Match], kps_a, kps_b, c: Correspondence) -> float:
    """Fraction of accepted matches that are correct (0 with no matches)."""
    if not matches:
        return 0.0
    return evaluate_matches(matches, kps_a, kps_b, c).precision


def pr_area(recalls, precisions) -> float:
    """Trapezoidal area under a precision/recall polyline.

    Points are sorted by recall, duplicate recalls keep their highest
    precision, and the curve is extended flat from its first point down to
    recall 0.
    """
    best: dict[float, float] = {}
    for r, p in zip(recalls, precisions):
        best[r] = max(p, best.get(r, 0.0))
    if not best:
        return 0.0
    rs = sorted(best)
    ps = [best[r] for r in rs]
    if rs[0] > 0:
        rs.insert(0, 0.0)
        ps.insert(0, ps[0])
    r, q = np.asarray(rs), np.asarray(ps)
    return float(np.sum(np.diff(r) * (q[1:] + q[:-1]) / 2.0))


def precision_recall_curve(desc_a, desc_b, kps_a, kps_b, c: Correspondence,
                           thresholds=AP_THRESHOLDS) -> tuple[list[float], list[float]]:
    """(recalls, precisions) for each NNDR threshold that accepts at least
    one match; thresholds that accept nothing have no defined precision."""
    kps_a, kps_b = list(kps_a), list(kps_b)
    if len(desc_a) != len(kps_a) or len(desc_b) != len(kps_b):
        raise DataError("descriptor and keypoint counts differ")
    if len(desc_a) == 0 or len(desc_b) < 2:
        return [], []
    nn, d1, d2 = nearest_two(desc_a, desc_b)
    ratio = nndr_ratios(d1, d2)
    correct = np.array([match_is_correct(kps_a, kps_b, i, int(nn[i]), c)
                        for i in range(len(kps_a))])
    gt = greedy_pairs(kps_a, kps_b, c)
    gt_a = np.array([i for i, _ in gt], dtype=int)
    gt_b = np.array([j for _, j in gt], dtype=int)
    recalls, precisions = [], []
    for th in thresholds:
        acc = ratio < th
        n_acc = int(acc.sum())
        if n_acc == 0:
            continue
        tp = int((acc & correct).sum())
        found = int((acc[gt_a] & (nn[gt_a] == gt_b)).sum()) if len(gt) else 0
        counts = MatchCounts(tp, n_acc - tp, len(gt) - found)
        recalls.append(counts.recall)
        precisions.append(counts.precision)
    return recalls, precisions


def average_precision(desc_a, desc_b, kps_a, kps_b, c: Correspondence,
                      thresholds=AP_THRESHOLDS) -> float:
    """Area under the precision/recall curve of an NNDR threshold sweep."""
    return pr_area(*precision_recall_curve(desc_a, desc_b, kps_a, kps_b, c, thresholds))
