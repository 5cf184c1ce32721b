"""CSV formats for keypoints, descriptors and matches.

Keypoint rows are ``x,y,scale,orientation,response`` in 6-decimal fixed
notation.  A descriptor row is a keypoint row followed by 128 values
written with 9 significant digits, enough to round-trip float32 exactly.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .descriptor import Descriptor, DescriptorList
from .errors import FormatError
from .keypoints import KeyPoint
from .matching import Match

KEYPOINT_FIELDS = ("x", "y", "scale", "orientation", "response")
MATCH_FIELDS = ("index_a", "index_b", "distance", "ratio")
DESC_DIM = 128


def _kp_cells(kp: KeyPoint) -> list[str]:
    return [f"{getattr(kp, f):.6f}" for f in KEYPOINT_FIELDS]


def _kp_from_cells(cells, where: str) -> KeyPoint:
    try:
        x, y, scale, ori, resp = (float(c) for c in cells)
    except ValueError as exc:
        raise FormatError(f"{where}: {exc}") from None
    return KeyPoint(x, y, scale, ori, resp)


def _rows(path, n_cols: int):
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0] != "x":
            raise FormatError(f"{path}: missing header row")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != n_cols:
                raise FormatError(f"{path}:{lineno}: expected {n_cols} columns, got {len(row)}")
            yield f"{path}:{lineno}", row


def write_keypoints(path, kps) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(KEYPOINT_FIELDS)
        for kp in kps:
            w.writerow(_kp_cells(kp))


def read_keypoints(path) -> list[KeyPoint]:
    return [_kp_from_cells(row, where) for where, row in _rows(path, len(KEYPOINT_FIELDS))]


def write_descriptors(path, descs) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(KEYPOINT_FIELDS) + [f"d{k}" for k in range(DESC_DIM)])
        for d in descs:
            w.writerow(_kp_cells(d.keypoint) + [f"{v:.9g}" for v in d.vector])


def read_descriptors(path) -> DescriptorList:
    n_kp = len(KEYPOINT_FIELDS)
    out = DescriptorList()
    for where, row in _rows(path, n_kp + DESC_DIM):
        kp = _kp_from_cells(row[:n_kp], where)
        try:
            vec = np.array([float(v) for v in row[n_kp:]], dtype=np.float32)
        except ValueError as exc:
            raise FormatError(f"{where}: {exc}") from None
        out.append(Descriptor(vec, kp))
    return out


def write_matches(path, matches) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MATCH_FIELDS)
        for m in matches:
            w.writerow([m.index_a, m.index_b, f"{m.distance:.9g}", f"{m.ratio:.9g}"])


def read_matches(path) -> list[Match]:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != MATCH_FIELDS:
            raise FormatError(f"{path}: bad header")
        try:
            return [Match(int(a), int(b), float(d), float(r)) for a, b, d, r in reader]
        except ValueError as exc:
            raise FormatError(f"{path}: {exc}") from None
