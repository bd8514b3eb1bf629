
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rangeann import (
    brute_force_range,
    calibrate_esr,
    capture_radii,
    frequency_distribution,
    metrics_at_step,
    percent_captured,
    synth_clustered,
)
from rangeann.datatools import BUCKET_BOUNDS


def test_percent_captured_extremes():
    syn = synth_clustered(500, 4, 5, seed=1, n_queries=20)
    lo, hi = capture_radii(syn.points, syn.queries, 2)
    curve = percent_captured(syn.points, syn.queries, [lo * 0.5, hi * 1.01])
    assert curve.fraction.tolist() == [0.0, 1.0]


def test_percent_captured_exact_matches_brute_force():
    syn = synth_clustered(1000, 8, 10, seed=2, n_queries=30)
    radii = np.linspace(0.01, 3.0, 10)
    curve = percent_captured(syn.points, syn.queries, radii)
    for r, f in zip(radii, curve.fraction):
        gt = brute_force_range(syn.points, syn.queries, r)
        assert f == gt.sizes.mean() / syn.points.n
    assert (np.diff(curve.fraction) >= 0).all()


def test_percent_captured_sample_and_errors():
    syn = synth_clustered(1000, 8, 10, seed=2, n_queries=30)
    a = percent_captured(syn.points, syn.queries, [0.5, 1.0], sample=200, seed=3)
    b = percent_captured(syn.points, syn.queries, [0.5, 1.0], sample=200, seed=3)
    assert np.array_equal(a.fraction, b.fraction)
    with pytest.raises(ValueError):
        percent_captured(syn.points, syn.queries, [])
    with pytest.raises(ValueError):
        percent_captured(syn.points, syn.queries, [2.0, 1.0])


def test_normalized_radii():
    syn = synth_clustered(200, 4, 2, seed=0, n_queries=5)
    curve = percent_captured(syn.points, syn.queries, [2.0, 3.0, 6.0])
    assert curve.normalized_radii().tolist() == [0.0, 0.25, 1.0]
    assert curve.radii.tolist() == [2.0, 3.0, 6.0]


def test_frequency_examples():
    assert frequency_distribution([0, 0, 0]).counts.tolist() == [3, 0, 0, 0, 0, 0]
    table = frequency_distribution([0, 5, 50, 500])
    assert table.counts.tolist() == [1, 1, 1, 1, 0, 0]
    assert table.labels() == ["0", "<=10", "<=100", "<=1000", "<=10000", "<=100000"]


def test_frequency_overflow():
    with pytest.warns(UserWarning):
        table = frequency_distribution([0, 200_000])
    assert table.has_overflow and table.overflow == 1 and table.total == 2
    assert table.rows()[-1] == (">100000", 1)


@given(st.lists(st.integers(0, 100_000), max_size=50))
def test_frequency_counts_sum(sizes):
    table = frequency_distribution(sizes)
    assert table.total == len(sizes) and not table.has_overflow
    for k in range(1, len(BUCKET_BOUNDS)):
        lo, hi = BUCKET_BOUNDS[k - 1], BUCKET_BOUNDS[k]
        assert table.counts[k] == sum(lo < s <= hi for s in sizes)


def test_synth_deterministic():
    a = synth_clustered(300, 5, 3, seed=9, n_queries=17)
    b = synth_clustered(300, 5, 3, seed=9, n_queries=17)
    assert a.points.data.tobytes() == b.points.data.tobytes()
    assert a.queries.data.tobytes() == b.queries.data.tobytes()
    assert a.radii == b.radii and a.queries.n == 17
    c = synth_clustered(300, 5, 3, seed=10, n_queries=17)
    assert a.points.data.tobytes() != c.points.data.tobytes()


def test_synth_single_cluster_no_spread():
    syn = synth_clustered(100, 3, 1, spread=0.0, seed=0, n_queries=4)
    assert (syn.points.data == syn.points.data[0]).all()
    gt = brute_force_range(syn.points, syn.points.data[:1], 0.0)
    assert gt.sizes.tolist() == [100]


def test_synth_errors():
    for kw in (dict(n=5, clusters=6), dict(clusters=0), dict(d=0), dict(spread=-1.0), dict(mix=(0, 0, 0))):
        args = dict(n=100, d=4, clusters=3) | kw
        with pytest.raises(ValueError):
            synth_clustered(**args)


def test_synth_radius_skew():
    syn = synth_clustered(20_000, 16, 20, seed=0)
    gt = brute_force_range(syn.points, syn.queries, syn.radii["dense"])
    assert (gt.sizes == 0).mean() >= 0.5
    assert gt.sizes.max() >= 500
    assert syn.radii["sparse"] < syn.radii["medium"] < syn.radii["dense"]


def test_metrics_at_step(small_instance):
    syn, G = small_instance
    r = syn.radii["sparse"]
    m = metrics_at_step(syn.queries, G, syn.points, r, step=20, b=100)
    assert m.reached.all()
    ok = m.reached
    assert (m.d_top1[ok] <= m.d_visited[ok]).all()
    assert (m.d_top1[ok] <= m.d_top10[ok]).all()
    assert (m.found == (m.d_top1 <= r)).all()
    assert m.values("d_top10").tolist() == m.d_top10.tolist()


def test_calibrate_esr():
    values = np.array([1.0, 2.0, 5.0, 7.0, np.nan])
    has = np.array([True, True, False, False, True])
    assert calibrate_esr(values, has) == 2.0
    found = np.array([False, True, False, False, False])
    assert calibrate_esr(values, has, found) == 1.0
    # no eligible result-bearing query: just below the smallest zero-result value
    esr = calibrate_esr(values, has, np.array([True, True, False, False, False]))
    assert esr < 5.0 and np.nextafter(esr, np.inf) == 5.0
    assert calibrate_esr([np.nan], [True]) == np.inf
