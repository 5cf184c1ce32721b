import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
import scenes
from hdrfeat.errors import ParameterError
from hdrfeat.filtering import cv_filter, gaussian_blur, log_transform
from hdrfeat.harris import (HarrisParams, harris_detect, harris_hdr_detect, harris_response,
                            harris_working_image, nms_mask)

CORNER_PIXELS = [(12, 12), (27, 12), (12, 27), (27, 27)]


def _nearest(kps, pts):
    return [min(np.hypot(k.x - x, k.y - y) for k in kps) for x, y in pts]


def test_white_square_four_corners():
    kps = harris_detect(scenes.white_square())
    assert len(kps) == 4
    assert max(_nearest(kps, CORNER_PIXELS)) <= 2.0


def test_output_sorted_and_integer():
    kps = harris_detect(scenes.smooth_texture((64, 64), 1))
    keys = [(-k.response, k.y, k.x) for k in kps]
    assert keys == sorted(keys)
    assert all(k.x == int(k.x) and k.y == int(k.y) and k.scale == 1.0 for k in kps)


def test_step_edge_has_no_corners():
    img = np.zeros((40, 40))
    img[:, 20:] = 1.0
    assert harris_detect(img) == []


def test_constant_image_has_no_corners():
    assert harris_detect(np.full((32, 32), 0.4)) == []
    assert harris_hdr_detect(np.full((32, 32), 40.0)) == []


def test_response_matches_oracle_formula():
    rng = np.random.default_rng(0)
    img = gaussian_blur(rng.random((20, 20)), 1.0)
    p = HarrisParams()
    # independent structure tensor via numpy.gradient-free explicit loops
    pad = np.pad(img, 1, mode="edge")
    ix = (pad[1:-1, 2:] - pad[1:-1, :-2]) / 2
    iy = (pad[2:, 1:-1] - pad[:-2, 1:-1]) / 2
    a, b, c = (gaussian_blur(v, p.tensor_sigma) for v in (ix * ix, iy * iy, ix * iy))
    expect = a * b - c * c - p.k * (a + b) ** 2
    np.testing.assert_allclose(harris_response(img, p), expect, rtol=1e-12, atol=1e-18)


def test_nms_plateau_keeps_first_in_raster_order():
    r = np.zeros((5, 5))
    r[2, 1] = r[2, 2] = 1.0
    assert list(zip(*np.nonzero(nms_mask(r, 0.5, 1)))) == [(2, 1)]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_nms_oracle(seed):
    rng = np.random.default_rng(seed)
    r = rng.integers(0, 4, size=(7, 8)).astype(float)  # many ties
    keep = nms_mask(r, 0.5, 1)
    h, w = r.shape
    for y, x in itertools.product(range(h), range(w)):
        ok = r[y, x] > 0.5
        for dy, dx in itertools.product((-1, 0, 1), repeat=2):
            yy, xx = y + dy, x + dx
            if (dy, dx) == (0, 0) or not (0 <= yy < h and 0 <= xx < w):
                continue
            before = (dy, dx) < (0, 0)
            ok &= r[y, x] > r[yy, xx] if before else r[y, x] >= r[yy, xx]
        assert keep[y, x] == ok


def test_hdr_variant_equals_manual_pipeline():
    img = scenes.white_square(bg=0.05) * 7.3
    p = HarrisParams()
    work = log_transform(cv_filter(gaussian_blur(img, p.blur_sigma), 5))
    np.testing.assert_array_equal(harris_working_image(img, p, 5), work)


def test_hdr_white_square_near_corners():
    # CV peaks on the dark side of an edge, displaced by up to the blur
    # plus CV window radius (1 + 2 px per axis) from the corner pixel
    kps = harris_hdr_detect(scenes.white_square(bg=0.05) * 7.3)
    assert len(kps) == 4
    assert max(_nearest(kps, CORNER_PIXELS)) <= 3.0 * np.sqrt(2)


def _brute_force_hdr_response(img, p):
    # blur with scipy, CV with the pure-Python oracle, explicit tensor
    from scipy import ndimage
    sm = ndimage.gaussian_filter(img, p.blur_sigma, mode="nearest", truncate=3.0)
    work = np.log1p(np.array(oracles.cv_image(sm.tolist(), 5)))
    pad = np.pad(work, 1, mode="edge")
    ix = (pad[1:-1, 2:] - pad[1:-1, :-2]) / 2
    iy = (pad[2:, 1:-1] - pad[:-2, 1:-1]) / 2
    a, b, c = (ndimage.gaussian_filter(v, p.tensor_sigma, mode="nearest", truncate=3.0)
               for v in (ix * ix, iy * iy, ix * iy))
    return a * b - c * c - p.k * (a + b) ** 2


def test_hdr_zero_background_corners_match_brute_force_oracle():
    # with a black background the CV ridge sits entirely outside the square:
    # one keypoint per quadrant, at the quadrant's maximum of R
    img = scenes.white_square()
    r = _brute_force_hdr_response(img, HarrisParams())
    expect = []
    for ys in (slice(0, 20), slice(20, 40)):
        for xs in (slice(0, 20), slice(20, 40)):
            y, x = np.unravel_index(np.argmax(r[ys, xs]), (20, 20))
            expect.append((float(x + xs.start), float(y + ys.start)))
    kps = harris_hdr_detect(img)
    assert sorted((k.x, k.y) for k in kps) == sorted(expect)
    # 5 px per axis outside the corner pixels: blur support (3) + CV radius (2)
    assert sorted(_nearest(kps, CORNER_PIXELS)) == [5 * np.sqrt(2)] * 4


@pytest.mark.parametrize("c", [0.5, 2.0, 10.0])
def test_hdr_positions_invariant_to_scale(c):
    img = scenes.lighting_sequence(1, (64, 64))[0]
    a = [(k.x, k.y) for k in harris_hdr_detect(img)]
    b = [(k.x, k.y) for k in harris_hdr_detect(c * img)]
    assert a == b and a


def test_params_validation():
    for bad in ({"k": 0}, {"k": 0.3}, {"blur_sigma": 0}, {"rel_threshold": 1.0}, {"nms_radius": 0}):
        with pytest.raises(ParameterError):
            HarrisParams(**bad)


def test_too_small():
    with pytest.raises(ParameterError):
        harris_detect(np.zeros((15, 40)))
