import csv
import json

import numpy as np
import pytest

import oracles
import scenes
from hdrfeat.cli import main
from hdrfeat.errors import ConfigurationError, ParameterError
from hdrfeat.fileio import read_descriptors, read_keypoints, read_matches
from hdrfeat.image import save_pgm
from hdrfeat.keypoints import KeyPoint
from hdrfeat.metrics import (Correspondence, average_precision, evaluate_matches, group_counts,
                             repeatability)
from hdrfeat.pipeline import (DatasetManifest, RunConfig, capture_mask, extract_features,
                              manifest_from_directory, run_benchmark, select_top_k,
                              thread_count)

SHAPE = (96, 96)


@pytest.fixture(scope="module")
def seq7():
    return scenes.lighting_sequence(7, SHAPE, seed=3)


def read_report_csv(path):
    with open(path) as fh:
        first = fh.readline()
        rows = list(csv.DictReader(fh))
    return first, rows


# --- top-k ------------------------------------------------------------------

def test_select_top_k_truncates_and_orders():
    rng = np.random.default_rng(0)
    kps = [KeyPoint(float(x), float(y), response=float(r))
           for x, y, r in zip(rng.uniform(0, 100, 600), rng.uniform(0, 100, 600), rng.random(600))]
    top = select_top_k(kps, 500)
    assert len(top) == 500
    assert all(a.response >= b.response for a, b in zip(top, top[1:]))
    assert min(k.response for k in top) >= max(k.response for k in kps if k not in top)
    assert len(select_top_k(kps[:300], 500)) == 300


def test_select_top_k_ties_and_bounds():
    kps = [KeyPoint(5, 2, response=1.0), KeyPoint(1, 2, response=1.0), KeyPoint(9, 1, response=1.0)]
    assert [(k.x, k.y) for k in select_top_k(kps, 2)] == [(9, 1), (1, 2)]
    with pytest.raises(ParameterError):
        select_top_k(kps, 0)


# --- configuration and manifests --------------------------------------------

@pytest.mark.parametrize("kwargs", [
    {"detector": "surf"}, {"descriptor": "orb"}, {"detector": "sift", "descriptor": "harris+sift"},
    {"dynamic_range": "xdr"}, {"top_k": 0}, {"M": 0}, {"nndr_th": 0.0}, {"nndr_th": 1.5},
    {"epsilon": 0.0}, {"cv_window": 4}, {"cv_window": 1}, {"uniformity": "maybe"},
])
def test_run_config_rejects(kwargs):
    with pytest.raises(ParameterError):
        RunConfig(**kwargs)


def test_run_config_echo_is_json():
    cfg = RunConfig(detector="hfhdr", descriptor="hfhdr+sift")
    echo = json.loads(json.dumps(cfg.echo()))
    assert echo["detector"] == "hfhdr" and echo["harris"]["k"] == cfg.harris.k


def test_manifest_load_and_pair_mapping(tmp_path):
    (tmp_path / "h2.txt").write_text("1 0 0\n0 1 -4\n0 0 1\n")
    data = {"scene": "s", "correspondence": "homography", "captures": [
        {"name": "a", "ldr": "a.pgm"},
        {"name": "b", "ldr": "b.pgm", "homography": [1, 0, 3, 0, 1, 0, 0, 0, 1]},
        {"name": "c", "ldr": "c.pgm", "homography": "h2.txt"},
    ]}
    (tmp_path / "m.json").write_text(json.dumps(data))
    m = DatasetManifest.load(tmp_path / "m.json")
    assert m.captures[1].ldr == tmp_path / "b.pgm"
    # a point at x0 in capture 0's frame sits at x0 - 3 in b and at y0 + 4 in c
    c = m.pair_correspondence(1, 2, 1.5)
    np.testing.assert_allclose(c.map_points([[7.0, 10.0]]), [[10.0, 14.0]])
    np.testing.assert_allclose(m.pair_correspondence(0, 1, 1.5).map_points([[10.0, 0.0]]),
                               [[7.0, 0.0]])
    again = DatasetManifest.from_dict(m.to_dict(tmp_path), tmp_path)
    assert [(c.name, c.ldr) for c in again.captures] == [(c.name, c.ldr) for c in m.captures]
    np.testing.assert_allclose(again.captures[2].homography, m.captures[2].homography)


def test_manifest_errors(tmp_path):
    with pytest.raises(ConfigurationError):
        DatasetManifest.load(tmp_path / "missing.json")
    with pytest.raises(ConfigurationError):
        DatasetManifest.from_dict({"captures": [{"ldr": "a.pgm"}]})
    with pytest.raises(ConfigurationError):
        DatasetManifest.from_dict({"captures": [{"ldr": "a"}, {"ldr": "b", "homography": [1, 2]}]})
    with pytest.raises(ConfigurationError):
        DatasetManifest.from_dict({"captures": [{"ldr": "a"}, {"ldr": "b"}],
                                   "correspondence": "optical-flow"})


def test_missing_mask_fails_before_compute(tmp_path, seq7):
    path = scenes.write_scene(tmp_path, seq7[:2])
    m = DatasetManifest.load(path)
    with pytest.raises(ConfigurationError, match="mask"):
        run_benchmark(m, RunConfig(uniformity="mask"), threads=1)
    (tmp_path / "cap01.hdr").unlink()
    with pytest.raises(ConfigurationError, match="cap01"):
        run_benchmark(m, RunConfig(), threads=1)


def test_manifest_from_directory(tmp_path):
    img = np.zeros((8, 8), np.uint8)
    for name in ("a.pgm", "a.hdr", "a_mask.pgm", "b.pgm", "roi.pgm", "notes.txt"):
        (tmp_path / name).write_bytes(b"")
    save_pgm(tmp_path / "c.png", img)
    m = manifest_from_directory(tmp_path)
    assert [c.name for c in m.captures] == ["a", "b", "c"]
    a = m.captures[0]
    assert a.hdr.name == "a.hdr" and a.ldr.name == "a.pgm" and a.mask.name == "a_mask.pgm"
    assert all(c.roi.name == "roi.pgm" for c in m.captures)
    with pytest.raises(ConfigurationError):
        manifest_from_directory(tmp_path / "nope")


def test_thread_count(monkeypatch):
    monkeypatch.setenv("HDRFEAT_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("HDRFEAT_THREADS", "")
    assert thread_count() >= 1
    for bad in ("0", "two"):
        monkeypatch.setenv("HDRFEAT_THREADS", bad)
        with pytest.raises(ConfigurationError):
            thread_count()


# --- running ----------------------------------------------------------------

def test_two_captures_one_row(tmp_path, seq7):
    m = DatasetManifest.load(scenes.write_scene(tmp_path, seq7[:2]))
    rep = run_benchmark(m, RunConfig(detector="hfhdr"), threads=1)
    assert len(rep.per_pair) == 1
    r = rep.per_pair[0]
    assert r.ok and r.pair_id == "0-1" and (r.capture_a, r.capture_b) == ("cap00", "cap01")
    for v in (r.rr, r.ur_r, r.ur_t, r.ap, r.matching_rate):
        assert 0.0 <= v <= 1.0


def test_seven_captures_aggregates_match_rows(tmp_path, seq7):
    m = DatasetManifest.load(scenes.write_scene(tmp_path / "s", seq7))
    rep = run_benchmark(m, RunConfig(detector="sfhdr"), threads=2)
    csv_path, json_path = rep.write(tmp_path / "out", "r")
    first, rows = read_report_csv(csv_path)
    assert first.startswith("# config: ")
    assert json.loads(first[len("# config: "):]) == json.loads(json.dumps(RunConfig().echo()))
    assert len(rows) == 21
    assert {r["pair_id"] for r in rows} == {f"{i}-{j}" for i in range(7) for j in range(i + 1, 7)}
    agg = json.loads(json_path.read_text())["aggregate"]

    def mean(col):
        return sum(float(r[col]) for r in rows) / len(rows)

    assert agg["srr"] == pytest.approx(mean("rr"), abs=1e-12)
    assert agg["map"] == pytest.approx(mean("ap"), abs=1e-12)
    assert agg["mean_matching_rate"] == pytest.approx(mean("matching_rate"), abs=1e-12)
    ur = [float(r[c]) for r in rows for c in ("ur_r", "ur_t")]
    assert agg["mean_ur"] == pytest.approx(sum(ur) / len(ur), abs=1e-12)
    assert agg["n_pairs"] == 21 and agg["n_failed"] == 0


def test_corrupt_capture_is_recorded(tmp_path, seq7):
    path = scenes.write_scene(tmp_path, seq7[:3])
    (tmp_path / "cap01.hdr").write_bytes(b"#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y 4 +X 4\n\x01")
    rep = run_benchmark(DatasetManifest.load(path), RunConfig(), threads=1)
    by_id = {r.pair_id: r for r in rep.per_pair}
    assert by_id["0-2"].ok
    assert not by_id["0-1"].ok and not by_id["1-2"].ok and "cap01" in by_id["0-1"].error
    assert "cap01" in rep.capture_errors
    assert rep.aggregate["n_failed"] == 2 and rep.aggregate["srr"] == by_id["0-2"].rr


def test_duplicated_capture_is_perfect(tmp_path, seq7):
    m = DatasetManifest.load(scenes.write_scene(tmp_path, [seq7[2], seq7[2]]))
    runs = [(d, "ldr") for d in ("harris", "hfhdr", "sift", "sfhdr")] + [("hfhdr", "hdr"),
                                                                        ("sfhdr", "hdr")]
    for det, dr in runs:
        (r,) = run_benchmark(m, RunConfig(detector=det, dynamic_range=dr), threads=1).per_pair
        assert r.n_matches > 0, (det, dr)
        assert r.rr == 1.0 and r.matching_rate == 1.0 and r.ap >= 0.999, (det, dr)


def test_pair_without_descriptors_scores_zero(tmp_path, seq7):
    # plain Harris on raw radiance only fires on the frame edge of the
    # brightest corner, where no orientation window fits
    m = DatasetManifest.load(scenes.write_scene(tmp_path, [seq7[2], seq7[2]]))
    (r,) = run_benchmark(m, RunConfig(detector="harris"), threads=1).per_pair
    assert r.ok and r.rr == 1.0
    assert (r.n_matches, r.ap, r.matching_rate) == (0, 0.0, 0.0)


def test_uniformity_off_and_roi(tmp_path, seq7):
    roi = np.zeros(SHAPE, bool)
    roi[10:80, 15:90] = True
    m = DatasetManifest.load(scenes.write_scene(tmp_path, seq7[:2], roi=roi))
    (r,) = run_benchmark(m, RunConfig(uniformity="off"), threads=1).per_pair
    assert r.ur_r is None and r.ur_t is None and r.rr is not None
    cfg = RunConfig(detector="hfhdr")
    (r,) = run_benchmark(m, cfg, threads=1).per_pair
    assert r.ok
    # background keypoints are left out of the group counts
    feats = extract_features(_load(m.captures[0].hdr), cfg)
    mask = capture_mask(m.captures[0], SHAPE, cfg)
    assert np.all(mask.labels[~roi] == 0)
    counts = group_counts(feats.keypoints, mask.labels)
    assert sum(counts) < len(feats.keypoints)
    assert r.ur_r == round(float(oracles.uniformity(list(counts))), 6)


def test_homography_scene(tmp_path):
    img = scenes.reflectance((128, 128), 4) * 50
    rot, H = scenes.rotated(img, 30)
    # H maps capture 0 into the rotated frame, so capture 1 maps back by inv(H)
    m = DatasetManifest.load(scenes.write_scene(tmp_path, [img, rot],
                                                homographies=[np.eye(3), np.linalg.inv(H)]))
    (r,) = run_benchmark(m, RunConfig(detector="sift", uniformity="off"), threads=1).per_pair
    (r_id,) = run_benchmark(DatasetManifest(m.scene, m.captures, "identity"),
                            RunConfig(detector="sift", uniformity="off"), threads=1).per_pair
    assert r.matching_rate >= 0.7 and r.rr > r_id.rr


def test_cli_chain_reproduces_benchmark(tmp_path, seq7):
    m = DatasetManifest.load(scenes.write_scene(tmp_path / "s", seq7[:2]))
    for det in ("hfhdr", "sfhdr"):
        cfg = RunConfig(detector=det, uniformity="off")
        (row,) = run_benchmark(m, cfg, threads=1).per_pair
        files = {}
        for k, cap in enumerate(m.captures):
            kp, desc = tmp_path / f"{det}{k}_kp.csv", tmp_path / f"{det}{k}_desc.csv"
            assert main(["detect", "--detector", det, "--in", str(cap.hdr), "--out", str(kp)]) == 0
            assert main(["describe", "--detector", det, "--in", str(cap.hdr),
                         "--keypoints", str(kp), "--out", str(desc)]) == 0
            files[k] = (kp, desc)
        out = tmp_path / f"{det}_m.csv"
        assert main(["match", "--a", str(files[0][1]), "--b", str(files[1][1]),
                     "--out", str(out)]) == 0
        c = Correspondence.identity()
        kps = [read_keypoints(files[k][0]) for k in (0, 1)]
        descs = [read_descriptors(files[k][1]) for k in (0, 1)]
        dkps = [[d.keypoint for d in ds] for ds in descs]
        matches = read_matches(out)
        assert len(matches) == row.n_matches
        assert round(repeatability(kps[0], kps[1], c, cfg.M), 6) == row.rr
        counts = evaluate_matches(matches, dkps[0], dkps[1], c)
        assert counts.tp == row.n_correct and round(counts.precision, 6) == row.matching_rate
        ap = average_precision(descs[0], descs[1], dkps[0], dkps[1], c)
        assert round(ap, 6) == row.ap

        # and the in-memory features equal the files
        feats = extract_features(_load(m.captures[0].hdr), cfg)
        fields = [(k.x, k.y, k.scale, k.orientation, k.response) for k in feats.keypoints]
        assert fields == [(k.x, k.y, k.scale, k.orientation, k.response) for k in kps[0]]


def _load(path):
    from hdrfeat.image import as_array, load_luminance
    return as_array(load_luminance(path))


def test_save_features(tmp_path, seq7):
    m = DatasetManifest.load(scenes.write_scene(tmp_path / "s", seq7[:2]))
    run_benchmark(m, RunConfig(), threads=1, features_dir=tmp_path / "f")
    names = sorted(p.name for p in (tmp_path / "f").iterdir())
    assert names == ["000_cap00_desc.csv", "000_cap00_kp.csv", "001_cap01_desc.csv",
                     "001_cap01_kp.csv"]
    assert len(read_descriptors(tmp_path / "f" / "000_cap00_desc.csv")) > 0
