"""HDR-aware feature points: Harris/HfHDR and SIFT/SfHDR detectors, SIFT
descriptors, NNDR matching and the RR / UR / AP evaluation suite."""

from .descriptor import (Descriptor, DescriptorList, assign_orientation, build_mini_scale_space,
                         describe, orient_and_describe)
from .errors import ConfigurationError, DataError, FormatError, HdrFeatError, ParameterError
from .filtering import cv_filter, gaussian_blur, gaussian_kernel, log_transform
from .harris import HarrisParams, harris_detect, harris_hdr_detect
from .image import (DynamicRange, FloatImage, RgbImage, load_image, load_luminance, save_pfm,
                    save_rgbe, to_luminance)
from .keypoints import KeyPoint
from .matching import Match, match_nndr
from .metrics import (Correspondence, average_precision, evaluate_matches, matching_rate,
                      repeatability, summarized_rr, uniformity)
from .pipeline import DatasetManifest, MetricsReport, RunConfig, run_benchmark, select_top_k
from .segmentation import IntensityMask, RoiMask, luminance_map, segment_terciles
from .sift import ScaleSpace, SiftDetectParams, build_scale_space, sift_detect, sift_hdr_detect

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "Correspondence", "DataError", "DatasetManifest", "Descriptor",
    "DescriptorList", "DynamicRange", "FloatImage", "FormatError", "HarrisParams",
    "HdrFeatError", "IntensityMask", "KeyPoint", "Match", "MetricsReport", "ParameterError",
    "RgbImage", "RoiMask", "RunConfig", "ScaleSpace", "SiftDetectParams", "assign_orientation",
    "average_precision", "build_mini_scale_space", "build_scale_space", "cv_filter", "describe",
    "evaluate_matches", "gaussian_blur", "gaussian_kernel", "harris_detect", "harris_hdr_detect",
    "load_image", "load_luminance", "log_transform", "luminance_map", "match_nndr",
    "matching_rate", "orient_and_describe", "repeatability", "run_benchmark", "save_pfm",
    "save_rgbe", "segment_terciles", "select_top_k", "sift_detect", "sift_hdr_detect",
    "summarized_rr", "to_luminance", "uniformity",
]
