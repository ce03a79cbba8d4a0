import json
import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ntlgen.errors import ConfigError, DataError, DegenerateImageError, ShapeError
from ntlgen.evaluation import evaluate_pairs
from ntlgen.geo import BBox, TileBundle
from ntlgen.geo.dataset import write_bundle
from ntlgen.metrics import (
    MetricReport,
    StandardizedImage,
    TileMetrics,
    d_eu,
    d_ma,
    destandardize,
    evaluate_arrays,
    r_ncc,
    standardize,
)

from oracles import d_eu_loops, d_ma_loops, r_ncc_loops

unit = st.floats(-1, 1, allow_nan=False)
images = arrays(np.float64, (4, 5), elements=unit)
G = np.array([[1.0, -1.0], [1.0, -1.0]])
O = np.array([[1.0, 1.0], [-1.0, -1.0]])


# standardize ---------------------------------------------------------------------


def test_standardize_examples():
    np.testing.assert_array_equal(standardize([0.0, 300.0, 150.0, 75.0], 0, 300), [-1.0, 1.0, 0.0, -0.5])
    np.testing.assert_array_equal(standardize([-10.0, 400.0], 0, 300), [-1.0, 1.0])
    with pytest.raises(ConfigError):
        standardize([1.0], 2.0, 2.0)


@given(arrays(np.float64, 20, elements=st.floats(0, 300)), st.floats(-50, 50), st.floats(1, 500))
def test_standardize_inverse_and_monotone(values, lo, width):
    hi = lo + width
    v = np.clip(values, lo, hi)
    img = StandardizedImage.from_raster(v, lo, hi)
    assert img.values.min() >= -1 and img.values.max() <= 1
    np.testing.assert_allclose(img.invert(), v, rtol=1e-6, atol=1e-6 * max(abs(lo), abs(hi)))
    order = np.argsort(v, kind="stable")
    assert np.all(np.diff(img.values[order]) >= 0)
    np.testing.assert_allclose(destandardize(standardize(v, lo, hi), lo, hi), v, rtol=1e-6, atol=1e-9 * hi)


# distances -------------------------------------------------------------------------


def test_distance_examples():
    assert d_eu(G, G) == 0.0 and d_ma(G, G) == 0.0
    assert d_eu(np.zeros((2, 2)), np.full((2, 2), 0.5)) == pytest.approx(1.0, abs=1e-15)
    assert d_ma(G, O) == 4.0
    with pytest.raises(ShapeError):
        d_eu(G, O[:1])


def test_ncc_examples():
    assert r_ncc(G, G) == pytest.approx(1.0, abs=1e-15)
    assert r_ncc(G, -G) == pytest.approx(-1.0, abs=1e-15)
    assert r_ncc(G, O) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(DegenerateImageError):
        r_ncc(np.ones((3, 3)), np.arange(9.0).reshape(3, 3))


def test_metrics_agree_with_loop_oracles():
    rng = np.random.default_rng(0)
    for _ in range(100):
        g, o = rng.uniform(-1, 1, (16, 16)), rng.uniform(-1, 1, (16, 16))
        assert abs(d_eu(g, o) - d_eu_loops(g, o)) < 1e-10
        assert abs(d_ma(g, o) - d_ma_loops(g, o)) < 1e-10
        assert abs(r_ncc(g, o) - r_ncc_loops(g, o)) < 1e-10


def test_manhattan_dominates_euclidean():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        g, o = rng.uniform(-1, 1, (4, 4)), rng.uniform(-1, 1, (4, 4))
        assert d_ma(g, o) >= d_eu(g, o)


@given(images, images, images)
def test_distances_are_metrics(a, b, c):
    for dist in (d_eu, d_ma):
        assert dist(a, b) == pytest.approx(dist(b, a), abs=1e-12)
        assert dist(a, c) <= dist(a, b) + dist(b, c) + 1e-9
    assert (d_ma(a, b) == 0) == bool(np.array_equal(a, b))
    # squaring underflows for differences below ~1e-154, so d_eu is only separated above that
    if np.abs(a - b).max() > 1e-150:
        assert d_eu(a, b) > 0
    if np.array_equal(a, b):
        assert d_eu(a, b) == 0


@given(images, images, st.floats(0.01, 100), st.floats(-10, 10))
def test_ncc_affine_behaviour(g, o, a, b):
    assume(np.ptp(g) > 1e-3 and np.ptp(o) > 1e-3)
    base = r_ncc(g, o)
    assert -1 <= base <= 1
    assert abs(r_ncc(a * g + b, o) - base) < 1e-10
    assert abs(r_ncc(g, a * o + b) - base) < 1e-10
    assert abs(r_ncc(-a * g + b, o) + base) < 1e-10


# reports ---------------------------------------------------------------------------


def test_report_aggregates_are_means(tmp_path):
    rep = MetricReport("rgbi", [TileMetrics("r0c0", 1.0, 2.0, 0.5), TileMetrics("r0c1", 3.0, 4.0, 0.7)])
    s = rep.summary()
    assert s == {"scenario": "rgbi", "n_tiles": 2, "mean_d_eu": 2.0, "mean_d_ma": 3.0, "mean_r_ncc": pytest.approx(0.6, abs=1e-12)}
    csv_path, json_path = rep.write(tmp_path)
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "cell_id,d_eu,d_ma,r_ncc" and lines[1].startswith("r0c0,1.0,2.0,0.5")
    assert json.loads(json_path.read_text())["mean_d_eu"] == 2.0


def test_single_tile_report_equals_tile():
    rng = np.random.default_rng(2)
    g, o = rng.uniform(-1, 1, (8, 8)), rng.uniform(-1, 1, (8, 8))
    s = evaluate_arrays([("r0c0", g, o)]).summary()
    assert s["mean_d_eu"] == d_eu(g, o) and s["mean_r_ncc"] == r_ncc(g, o)


@given(st.lists(st.tuples(st.floats(0, 50), st.floats(0, 50), st.floats(-1, 1)), min_size=1, max_size=20))
def test_aggregate_mean_matches_arithmetic_mean(rows):
    rep = MetricReport("x", [TileMetrics(f"r0c{i}", *r) for i, r in enumerate(rows)])
    assert abs(rep.mean("d_eu") - math.fsum(r[0] for r in rows) / len(rows)) < 1e-12
    assert abs(rep.mean("r_ncc") - math.fsum(r[2] for r in rows) / len(rows)) < 1e-12


# directory evaluation ----------------------------------------------------------------


def _write_night(root, cid, values):
    b = TileBundle(cid, BBox(0, 1, 0, 1))
    b.add("night", values)
    write_bundle(root, b)


def test_evaluate_identical_dirs(tmp_path):
    rng = np.random.default_rng(0)
    for i in range(3):
        _write_night(tmp_path, f"r0c{i}", rng.uniform(0, 300, (8, 8)))
    rep = evaluate_pairs(tmp_path, tmp_path)
    assert rep.n_tiles == 3
    assert all(t.r_ncc == 1.0 and t.d_eu == 0.0 and t.d_ma == 0.0 for t in rep.tiles)


def test_evaluate_standardizes_night_range(tmp_path):
    truth, pred = tmp_path / "truth", tmp_path / "pred"
    base = np.random.default_rng(0).uniform(0, 200, (4, 4))
    _write_night(truth, "r0c0", base)
    _write_night(pred, "r0c0", base + 75.0)
    (pred / "translate.json").write_text(json.dumps({"scenario": "rgb"}))
    rep = evaluate_pairs(pred, truth)
    assert rep.scenario == "rgb"
    # +75 radiance is +0.5 in standardized units on every pixel
    assert rep.tiles[0].d_ma == pytest.approx(16 * 0.5, rel=1e-6)
    assert rep.tiles[0].r_ncc == pytest.approx(1.0, abs=1e-6)


def test_evaluate_unmatched_ids(tmp_path):
    truth, pred = tmp_path / "truth", tmp_path / "pred"
    _write_night(truth, "r0c0", np.arange(16.0).reshape(4, 4))
    _write_night(pred, "r0c0", np.arange(16.0).reshape(4, 4))
    _write_night(pred, "r5c5", np.arange(16.0).reshape(4, 4))
    with pytest.raises(DataError, match="r5c5"):
        evaluate_pairs(pred, truth)
