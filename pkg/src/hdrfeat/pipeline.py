"""Benchmark pipeline: detect, keep the strongest, describe, match all pairs.

For every capture of a scene: load the luminance, detect keypoints, keep
the ``top_k`` strongest, assign orientations and compute SIFT
descriptors.  Every unordered pair of distinct captures is then matched
and scored (RR, AP, matching rate, plus UR for both captures), and the
per-pair rows and their means are written as CSV and JSON.

Keypoint fields are rounded to the precision of the keypoint CSV as soon
as they are produced, so a ``detect | describe | match`` run through the
CLI files reproduces the benchmark numbers exactly.
"""

from __future__ import annotations

import csv
import itertools
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .descriptor import DescriptorList, assign_orientation, build_mini_scale_space, describe
from .errors import ConfigurationError, DataError, HdrFeatError, ParameterError
from .fileio import write_descriptors, write_keypoints
from .harris import HarrisParams, check_size, detect_on_working_image, harris_working_image
from .image import DynamicRange, FloatImage, as_array, load_luminance
from .keypoints import KeyPoint, quantize, sort_by_response
from .matching import match_nndr
from .metrics import (Correspondence, average_precision, evaluate_matches, repeatability,
                      uniformity)
from .segmentation import IntensityMask, RoiMask, luminance_map, segment_terciles
from .sift import ScaleSpace, SiftDetectParams, build_scale_space, detect_in_scale_space, sift_working_image

DETECTORS = ("harris", "hfhdr", "sift", "sfhdr")
DESCRIPTORS = ("native", "harris+sift", "hfhdr+sift")
UR_MODES = ("segment", "mask", "off")
IMAGE_SUFFIXES = (".hdr", ".pic", ".pfm", ".png", ".pgm", ".ppm", ".pnm")
HDR_SUFFIXES = (".hdr", ".pic", ".pfm")

__all__ = [
    "DETECTORS", "Capture", "DatasetManifest", "MetricsReport", "PairResult",
    "RunConfig", "description_space", "detect_keypoints", "extract_features",
    "manifest_from_directory", "orient_keypoints", "run_benchmark", "select_top_k",
    "thread_count",
]


def select_top_k(kps, k: int) -> list[KeyPoint]:
    """The ``k`` strongest keypoints, ordered by (response desc, y, x)."""
    if k < 1:
        raise ParameterError(f"top_k must be >= 1, got {k}")
    return sort_by_response(kps)[:k]


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a benchmark run.

    ``descriptor`` only names the composition: SIFT descriptors are always
    computed, on the detector's own working image.  ``uniformity`` chooses
    where UR masks come from: ``segment`` uses a capture's mask file when
    given and otherwise segments its luminance (inside the ROI, or the
    whole frame); ``mask`` requires mask files; ``off`` skips UR.
    """

    detector: str = "sfhdr"
    descriptor: str = "native"
    dynamic_range: str = "hdr"
    top_k: int = 500
    nndr_th: float = 0.7
    M: int = 500
    epsilon: float = 1.5
    cv_window: int = 5
    alpha: float = 0.007
    uniformity: str = "segment"
    harris: HarrisParams = field(default_factory=HarrisParams)
    sift: SiftDetectParams = field(default_factory=SiftDetectParams)

    def __post_init__(self):
        if self.detector not in DETECTORS:
            raise ParameterError(f"unknown detector {self.detector!r}; choose from {DETECTORS}")
        if self.descriptor not in DESCRIPTORS:
            raise ParameterError(f"unknown descriptor {self.descriptor!r}; choose from {DESCRIPTORS}")
        if self.descriptor != "native" and self.descriptor.split("+")[0] != self.detector:
            raise ParameterError(f"descriptor {self.descriptor!r} does not fit detector {self.detector!r}")
        try:
            object.__setattr__(self, "dynamic_range", DynamicRange(self.dynamic_range).value)
        except ValueError:
            raise ParameterError(f"dynamic_range must be 'ldr' or 'hdr', got {self.dynamic_range!r}") from None
        if self.top_k < 1 or self.M < 1:
            raise ParameterError("top_k and M must be >= 1")
        if not 0.0 < self.nndr_th <= 1.0:
            raise ParameterError("nndr_th must be in (0, 1]")
        if not self.epsilon > 0:
            raise ParameterError("epsilon must be > 0")
        if self.cv_window < 3 or self.cv_window % 2 == 0:
            raise ParameterError("cv_window must be odd and >= 3")
        if self.uniformity not in UR_MODES:
            raise ParameterError(f"uniformity must be one of {UR_MODES}")

    @property
    def hdr_variant(self) -> bool:
        return self.detector in ("hfhdr", "sfhdr")

    def echo(self) -> dict:
        """JSON-friendly copy of the configuration."""
        return asdict(self)


# ---------------------------------------------------------------------------
# per-image feature extraction

def _working_image(img, config: RunConfig) -> np.ndarray:
    cv = config.cv_window if config.hdr_variant else None
    if config.detector in ("harris", "hfhdr"):
        return harris_working_image(img, config.harris, cv)
    return sift_working_image(img, cv)


def description_space(img, config: RunConfig) -> ScaleSpace:
    """Pyramid the descriptors are sampled from (and, for SIFT, detected in)."""
    work = _working_image(img, config)
    if config.detector in ("harris", "hfhdr"):
        return build_mini_scale_space(work)
    return build_scale_space(work, config.sift)


def detect_keypoints(img, config: RunConfig, ss: ScaleSpace | None = None) -> list[KeyPoint]:
    """Detect, keep the ``top_k`` strongest and round to CSV precision."""
    if config.detector in ("harris", "hfhdr"):
        arr = as_array(img)
        check_size(arr)
        kps = detect_on_working_image(_working_image(arr, config), config.harris)
    else:
        if ss is None:
            ss = description_space(img, config)
        kps = detect_in_scale_space(ss, config.sift)
    return [quantize(kp) for kp in select_top_k(kps, config.top_k)]


def orient_keypoints(ss: ScaleSpace, kps) -> list[KeyPoint]:
    """Oriented (and rounded) copies of ``kps``, in input order."""
    return [quantize(o) for kp in kps for o in assign_orientation(ss, kp)]


@dataclass
class Features:
    keypoints: list[KeyPoint]  # top-k detections, used for RR
    descriptors: DescriptorList  # oriented copies, used for matching


def extract_features(img, config: RunConfig) -> Features:
    ss = description_space(img, config)
    kps = detect_keypoints(img, config, ss)
    return Features(kps, describe(ss, orient_keypoints(ss, kps)))


# ---------------------------------------------------------------------------
# manifests

@dataclass(frozen=True)
class Capture:
    name: str
    ldr: Path | None = None
    hdr: Path | None = None
    roi: Path | None = None
    mask: Path | None = None
    homography: np.ndarray | None = None  # maps this capture into capture 0's frame

    def image(self, dynamic_range: str) -> Path | None:
        return self.hdr if dynamic_range == "hdr" else self.ldr


def _read_homography(value, base: Path) -> np.ndarray:
    if isinstance(value, str):
        path = base / value
        try:
            value = [float(t) for t in path.read_text().split()]
        except (OSError, ValueError) as exc:
            raise ConfigurationError(f"cannot read homography {path}: {exc}") from None
    H = np.asarray(value, dtype=np.float64)
    if H.size != 9:
        raise ConfigurationError(f"homography needs 9 values, got {H.size}")
    H = H.reshape(3, 3)
    if not abs(np.linalg.det(H)) > 1e-12:
        raise ConfigurationError("homography is not invertible")
    return H


@dataclass(frozen=True)
class DatasetManifest:
    """A scene: its captures and how their frames relate."""

    scene: str
    captures: tuple[Capture, ...]
    correspondence: str = "identity"

    def __post_init__(self):
        if len(self.captures) < 2:
            raise ConfigurationError("a manifest needs at least two captures")
        if self.correspondence not in ("identity", "homography"):
            raise ConfigurationError(f"unknown correspondence {self.correspondence!r}")

    @classmethod
    def from_dict(cls, data: dict, base: Path = Path(".")) -> "DatasetManifest":
        """Build from parsed JSON; relative paths resolve against ``base``."""
        base = Path(base)
        caps = []
        for k, c in enumerate(data.get("captures", [])):
            def p(key):
                return base / c[key] if c.get(key) else None
            H = _read_homography(c["homography"], base) if c.get("homography") is not None else None
            ref = c.get("hdr") or c.get("ldr") or f"capture{k}"
            caps.append(Capture(c.get("name") or Path(ref).stem, p("ldr"), p("hdr"),
                                p("roi"), p("mask"), H))
        return cls(data.get("scene", base.name), tuple(caps), data.get("correspondence", "identity"))

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read manifest {path}: {exc}") from None
        return cls.from_dict(data, path.parent)

    def to_dict(self, base: Path | None = None) -> dict:
        def rel(p):
            if p is None:
                return None
            return os.path.relpath(p, base) if base is not None else str(p)
        caps = []
        for c in self.captures:
            d = {"name": c.name, "ldr": rel(c.ldr), "hdr": rel(c.hdr),
                 "roi": rel(c.roi), "mask": rel(c.mask)}
            if c.homography is not None:
                d["homography"] = [float(v) for v in c.homography.ravel()]
            caps.append({k: v for k, v in d.items() if v is not None})
        return {"scene": self.scene, "correspondence": self.correspondence, "captures": caps}

    def pair_correspondence(self, i: int, j: int, epsilon: float) -> Correspondence:
        """Mapping from capture i's frame into capture j's: ``inv(H_j) @ H_i``."""
        if self.correspondence == "identity":
            return Correspondence(None, epsilon)
        eye = np.eye(3)
        Hi = self.captures[i].homography
        Hj = self.captures[j].homography
        Hi = eye if Hi is None else Hi
        Hj = eye if Hj is None else Hj
        return Correspondence(np.linalg.solve(Hj, Hi), epsilon)

    def validate(self, config: RunConfig) -> None:
        """Raise ConfigurationError if any file the run needs is missing."""
        problems = []
        for c in self.captures:
            img = c.image(config.dynamic_range)
            if img is None:
                problems.append(f"{c.name}: no {config.dynamic_range} image")
            elif not img.is_file():
                problems.append(f"{c.name}: missing {img}")
            if config.uniformity == "mask" and c.mask is None:
                problems.append(f"{c.name}: UR requested but no mask given")
            if config.uniformity != "off":
                for p in (c.mask, c.roi):
                    if p is not None and not p.is_file():
                        problems.append(f"{c.name}: missing {p}")
        if problems:
            raise ConfigurationError("; ".join(problems))


def manifest_from_directory(directory, scene: str | None = None,
                            correspondence: str = "identity") -> DatasetManifest:
    """Manifest for a flat directory of captures.

    Images sharing a stem form one capture (HDR formats fill ``hdr``, the
    rest ``ldr``).  ``<stem>_roi.pgm`` and ``<stem>_mask.pgm`` attach to
    their capture; a lone ``roi.pgm`` applies to every capture.
    """
    d = Path(directory)
    if not d.is_dir():
        raise ConfigurationError(f"{d} is not a directory")
    shared_roi = d / "roi.pgm" if (d / "roi.pgm").is_file() else None
    groups: dict[str, dict[str, Path]] = {}
    for f in sorted(d.iterdir()):
        suffix = f.suffix.lower()
        if not f.is_file() or suffix not in IMAGE_SUFFIXES or f.name == "roi.pgm":
            continue
        stem = f.stem
        for tag in ("roi", "mask"):
            if stem.endswith("_" + tag) and suffix == ".pgm":
                groups.setdefault(stem[:-len(tag) - 1], {})[tag] = f
                break
        else:
            kind = "hdr" if suffix in HDR_SUFFIXES else "ldr"
            groups.setdefault(stem, {}).setdefault(kind, f)
    caps = tuple(Capture(stem, g.get("ldr"), g.get("hdr"), g.get("roi", shared_roi), g.get("mask"))
                 for stem, g in sorted(groups.items()) if "ldr" in g or "hdr" in g)
    return DatasetManifest(scene or d.name, caps, correspondence)


# ---------------------------------------------------------------------------
# running

def thread_count() -> int:
    """Worker threads: ``HDRFEAT_THREADS`` if set, else the CPU count."""
    raw = os.environ.get("HDRFEAT_THREADS")
    if raw is None or raw.strip() == "":
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"HDRFEAT_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigurationError("HDRFEAT_THREADS must be >= 1")
    return n


@dataclass
class CaptureResult:
    features: Features | None = None
    ur: float | None = None
    error: str | None = None


def capture_mask(capture: Capture, shape, config: RunConfig) -> IntensityMask:
    """UR groups for a capture: its mask file, or a tercile segmentation of
    its luminance map (HDR image preferred) inside the ROI."""
    if capture.mask is not None:
        mask = IntensityMask.from_pgm(capture.mask)
    else:
        src = capture.hdr if capture.hdr is not None else capture.ldr
        lum = load_luminance(src)
        roi = RoiMask.from_pgm(capture.roi) if capture.roi is not None else None
        mask = segment_terciles(luminance_map(lum, config.alpha), roi)
    if mask.labels.shape != tuple(shape):
        raise DataError(f"{capture.name}: mask is {mask.width}x{mask.height}, "
                        f"image is {shape[1]}x{shape[0]}")
    return mask


def process_capture(capture: Capture, config: RunConfig) -> CaptureResult:
    try:
        img: FloatImage = load_luminance(capture.image(config.dynamic_range))
        feats = extract_features(img, config)
        ur = None
        if config.uniformity != "off":
            ur = uniformity(feats.keypoints, capture_mask(capture, img.data.shape, config))
        return CaptureResult(feats, ur)
    except (HdrFeatError, OSError, ValueError) as exc:
        return CaptureResult(error=f"{type(exc).__name__}: {exc}")


@dataclass
class PairResult:
    pair_id: str
    capture_a: str
    capture_b: str
    rr: float | None = None
    ur_r: float | None = None
    ur_t: float | None = None
    ap: float | None = None
    matching_rate: float | None = None
    n_matches: int | None = None
    n_correct: int | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _q(v: float | None) -> float | None:
    # per-pair values are kept at the precision the CSV stores
    return None if v is None else float(f"{v:.6f}")


def evaluate_pair(a: CaptureResult, b: CaptureResult, c: Correspondence,
                  config: RunConfig, row: PairResult) -> PairResult:
    fa, fb = a.features, b.features
    row.rr = _q(repeatability(fa.keypoints, fb.keypoints, c, config.M))
    kps_a = [d.keypoint for d in fa.descriptors]
    kps_b = [d.keypoint for d in fb.descriptors]
    if len(fa.descriptors) and len(fb.descriptors) >= 2:
        matches = match_nndr(fa.descriptors, fb.descriptors, config.nndr_th)
        ap = average_precision(fa.descriptors, fb.descriptors, kps_a, kps_b, c)
    else:
        matches, ap = [], 0.0
    counts = evaluate_matches(matches, kps_a, kps_b, c)
    row.ap = _q(ap)
    row.matching_rate = _q(counts.precision)
    row.n_matches = len(matches)
    row.n_correct = counts.tp
    row.ur_r, row.ur_t = _q(a.ur), _q(b.ur)
    return row


def _mean(values) -> float | None:
    values = [v for v in values if v is not None]
    return float(np.mean(values)) if values else None


@dataclass
class MetricsReport:
    scene: str
    per_pair: list[PairResult]
    config: dict
    capture_errors: dict[str, str] = field(default_factory=dict)

    @property
    def ok_pairs(self) -> list[PairResult]:
        return [r for r in self.per_pair if r.ok]

    @property
    def aggregate(self) -> dict:
        ok = self.ok_pairs
        return {
            "srr": _mean(r.rr for r in ok),
            "mean_ur": _mean([r.ur_r for r in ok] + [r.ur_t for r in ok]),
            "map": _mean(r.ap for r in ok),
            "mean_matching_rate": _mean(r.matching_rate for r in ok),
            "n_pairs": len(self.per_pair),
            "n_failed": len(self.per_pair) - len(ok),
        }

    CSV_FIELDS = ("pair_id", "capture_a", "capture_b", "rr", "ur_r", "ur_t", "ap",
                  "matching_rate", "n_matches", "n_correct", "error")

    def write_csv(self, path) -> None:
        """Per-pair rows; the first line is a ``# config:`` comment."""
        def cell(v):
            if v is None:
                return ""
            if isinstance(v, float):
                return f"{v:.6f}"
            return v
        with open(path, "w", newline="") as fh:
            fh.write("# config: " + json.dumps(self.config, sort_keys=True) + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.CSV_FIELDS)
            for r in self.per_pair:
                w.writerow([cell(getattr(r, f)) for f in self.CSV_FIELDS])

    def to_json(self) -> dict:
        return {
            "scene": self.scene,
            "config": self.config,
            "aggregate": self.aggregate,
            "capture_errors": self.capture_errors,
            "per_pair": [asdict(r) for r in self.per_pair],
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")

    def write(self, out_dir, stem: str = "report") -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path, json_path = out / f"{stem}.csv", out / f"{stem}.json"
        self.write_csv(csv_path)
        self.write_json(json_path)
        return csv_path, json_path


def run_benchmark(manifest: DatasetManifest, config: RunConfig,
                  threads: int | None = None, features_dir=None) -> MetricsReport:
    """Run the full pipeline on one scene.

    Captures are processed concurrently on ``threads`` workers (default
    :func:`thread_count`); results are gathered in manifest order so the
    report does not depend on scheduling.  A capture or pair that fails is
    recorded in its row and the run continues.  ``features_dir``, when
    given, receives each capture's keypoint and descriptor CSVs.
    """
    manifest.validate(config)
    n_threads = thread_count() if threads is None else threads
    caps = manifest.captures
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            results = list(pool.map(lambda c: process_capture(c, config), caps))
    else:
        results = [process_capture(c, config) for c in caps]

    if features_dir is not None:
        fdir = Path(features_dir)
        fdir.mkdir(parents=True, exist_ok=True)
        for k, (cap, res) in enumerate(zip(caps, results)):
            if res.features is not None:
                write_keypoints(fdir / f"{k:03d}_{cap.name}_kp.csv", res.features.keypoints)
                write_descriptors(fdir / f"{k:03d}_{cap.name}_desc.csv", res.features.descriptors)

    rows = []
    for i, j in itertools.combinations(range(len(caps)), 2):
        row = PairResult(f"{i}-{j}", caps[i].name, caps[j].name)
        bad = [f"{caps[k].name}: {results[k].error}" for k in (i, j) if results[k].error]
        if bad:
            row.error = "; ".join(bad)
        else:
            try:
                evaluate_pair(results[i], results[j],
                              manifest.pair_correspondence(i, j, config.epsilon), config, row)
            except (HdrFeatError, ValueError, np.linalg.LinAlgError) as exc:
                row = PairResult(row.pair_id, row.capture_a, row.capture_b,
                                 error=f"{type(exc).__name__}: {exc}")
        rows.append(row)
    errors = {c.name: r.error for c, r in zip(caps, results) if r.error}
    return MetricsReport(manifest.scene, rows, config.echo(), errors)
