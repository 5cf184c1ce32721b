"""``hdrfeat`` command line.

Exit status: 0 on success, 1 on usage or configuration errors, 2 on bad
or unreadable input data.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import replace
from pathlib import Path

from .descriptor import describe
from .errors import ConfigurationError, DataError, ParameterError
from .fileio import read_descriptors, read_keypoints, write_descriptors, write_keypoints, write_matches
from .harris import HarrisParams
from .image import as_array, load_luminance, luminance_heatmap
from .matching import match_nndr
from .pipeline import (DETECTORS, DESCRIPTORS, UR_MODES, DatasetManifest, RunConfig,
                       description_space, detect_keypoints, manifest_from_directory,
                       orient_keypoints, run_benchmark)
from .segmentation import RoiMask, luminance_map, segment_terciles
from .sift import SiftDetectParams

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _detector_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("detector")
    g.add_argument("--detector", choices=DETECTORS, default="sfhdr")
    g.add_argument("--top-k", type=int, default=500, help="keep the N strongest keypoints")
    g.add_argument("--cv-window", type=int, default=5, help="CV filter side (HDR variants)")
    g.add_argument("--harris-k", type=float, default=HarrisParams.k)
    g.add_argument("--harris-threshold", type=float, default=HarrisParams.rel_threshold,
                   help="fraction of the peak Harris response")
    g.add_argument("--contrast-threshold", type=float, default=SiftDetectParams.contrast_threshold)
    g.add_argument("--edge-ratio", type=float, default=SiftDetectParams.edge_ratio)
    g.add_argument("--octaves", type=int, default=None)


def _config(args, **extra) -> RunConfig:
    harris = replace(HarrisParams(), k=args.harris_k, rel_threshold=args.harris_threshold)
    sift = replace(SiftDetectParams(), contrast_threshold=args.contrast_threshold,
                   edge_ratio=args.edge_ratio, n_octaves=args.octaves)
    return RunConfig(detector=args.detector, top_k=args.top_k, cv_window=args.cv_window,
                     harris=harris, sift=sift, **extra)


def cmd_detect(args) -> int:
    img = load_luminance(args.input)
    kps = detect_keypoints(img, _config(args))
    write_keypoints(args.out, kps)
    print(f"{len(kps)} keypoints -> {args.out}")
    return EXIT_OK


def cmd_describe(args) -> int:
    img = load_luminance(args.input)
    config = _config(args)
    ss = description_space(img, config)
    kps = read_keypoints(args.keypoints)
    h, w = as_array(img).shape
    if any(not (0 <= k.x < w and 0 <= k.y < h) for k in kps):
        raise DataError(f"{args.keypoints}: keypoints fall outside the {w}x{h} image")
    descs = describe(ss, orient_keypoints(ss, kps))
    write_descriptors(args.out, descs)
    print(f"{len(descs)} descriptors ({descs.dropped} dropped) -> {args.out}")
    return EXIT_OK


def cmd_match(args) -> int:
    a, b = read_descriptors(args.a), read_descriptors(args.b)
    if len(b) < 2:
        raise DataError(f"{args.b}: need at least two descriptors to match against")
    matches = match_nndr(a, b, args.nndr_th) if len(a) else []
    write_matches(args.out, matches)
    print(f"{len(matches)} matches -> {args.out}")
    return EXIT_OK


def cmd_segment(args) -> int:
    lum = luminance_map(load_luminance(args.input), args.alpha)
    roi = RoiMask.from_pgm(args.roi) if args.roi else None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        mask = segment_terciles(lum, roi)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    mask.save_pgm(args.out)
    if args.heatmap:
        luminance_heatmap(lum, args.heatmap)
    dark, mid, bright = mask.counts()
    print(f"dark={dark} mid={mid} bright={bright} -> {args.out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.manifest:
        manifest = DatasetManifest.load(args.manifest)
    else:
        manifest = manifest_from_directory(args.dir)
    config = _config(args, descriptor=args.descriptor, dynamic_range=args.dynamic_range,
                     nndr_th=args.nndr_th, M=args.M, epsilon=args.epsilon,
                     uniformity=args.uniformity)
    out = Path(args.out_dir)
    report = run_benchmark(manifest, config,
                           features_dir=out / "features" if args.save_features else None)
    csv_path, json_path = report.write(out, args.stem)
    print(json.dumps(report.aggregate, sort_keys=True))
    print(f"-> {csv_path}, {json_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hdrfeat", description="HDR-aware feature detection and benchmarking.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("detect", help="image -> keypoint CSV")
    p.add_argument("--in", dest="input", required=True, help="image (.hdr, .pfm, .png, .pgm, .ppm)")
    p.add_argument("--out", required=True)
    _detector_args(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("describe", help="image + keypoints -> descriptor CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--keypoints", required=True)
    p.add_argument("--out", required=True)
    _detector_args(p)
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("match", help="two descriptor CSVs -> match CSV")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--nndr-th", type=float, default=0.7)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("segment", help="image (+ ROI) -> intensity mask PGM")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--roi", help="PGM, 0 = background")
    p.add_argument("--out", required=True)
    p.add_argument("--heatmap", help="also write the luminance map as a PPM heat map")
    p.add_argument("--alpha", type=float, default=0.007)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("bench", help="run the full benchmark on a scene")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--manifest", help="scene manifest JSON")
    src.add_argument("--dir", help="directory of captures (see manifest_from_directory)")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--stem", default="report", help="report file name stem")
    p.add_argument("--dynamic-range", choices=("ldr", "hdr"), default="hdr")
    p.add_argument("--descriptor", choices=DESCRIPTORS, default="native")
    p.add_argument("--nndr-th", type=float, default=0.7)
    p.add_argument("--M", type=int, default=500, help="RR keypoint cap")
    p.add_argument("--epsilon", type=float, default=1.5, help="repeat/match radius in pixels")
    p.add_argument("--uniformity", choices=UR_MODES, default="segment")
    p.add_argument("--save-features", action="store_true",
                   help="also write per-capture keypoint and descriptor CSVs")
    _detector_args(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ParameterError, ConfigurationError) as exc:
        print(f"hdrfeat {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"hdrfeat {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
