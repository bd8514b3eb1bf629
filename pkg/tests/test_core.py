import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rangeann import DistanceKind, PointSet, distance, quantize, quantized_distance, rerank
from conftest import line_points

finite = st.floats(-1e3, 1e3, allow_nan=False, width=32)


def test_distance_examples():
    assert distance([0, 0], [3, 4]) == 25.0
    assert distance([1, 2], [3, 4], DistanceKind.NEG_INNER_PRODUCT) == -11.0
    x = np.random.default_rng(0).standard_normal(7)
    assert distance(x, x) == 0.0


def test_distance_dimension_mismatch():
    with pytest.raises(ValueError):
        distance([1, 2], [1, 2, 3])


def test_distance_kind_parse():
    assert DistanceKind.parse("l2") is DistanceKind.SQEUCLIDEAN
    assert DistanceKind.parse("mips") is DistanceKind.NEG_INNER_PRODUCT
    with pytest.raises(ValueError):
        DistanceKind.parse("cosine-ish")


def test_uint8_distance_is_exact():
    a = np.full(4096, 255, np.uint8)
    b = np.zeros(4096, np.uint8)
    assert distance(a, b) == 4096 * 255 ** 2
    assert distance(a, a, "ip") == -(4096 * 255 ** 2)


@given(arrays(np.float32, 6, elements=finite), arrays(np.float32, 6, elements=finite))
def test_distance_properties(a, b):
    assert distance(a, b) == distance(b, a)
    assert distance(a, b) >= 0
    assert distance(a, a, "ip") == pytest.approx(-float(np.dot(a.astype(np.float64), a)), rel=1e-12, abs=1e-9)


def test_pointset_validation():
    with pytest.raises(ValueError):
        PointSet(np.zeros(5, np.float32))
    with pytest.raises(ValueError):
        PointSet(np.zeros((3, 0), np.float32))
    with pytest.raises(TypeError):
        PointSet(np.zeros((3, 2), np.int32))
    p = PointSet(np.zeros((0, 4), np.uint8))
    assert (p.n, p.d, p.elem) == (0, 4, "uint8")


def test_quantize_constant_dataset():
    qp = quantize(PointSet(np.full((5, 3), 2.5, np.float32)))
    assert not qp.codes.any()
    assert np.array_equal(qp.dequantize(), np.full((5, 3), 2.5))
    assert quantized_distance([2.5, 2.5, 2.5], 3, qp) == 0.0


def test_quantize_endpoints():
    qp = quantize(line_points(0.0, 1.0))
    assert qp.codes.ravel().tolist() == [0, 255]
    assert [quantized_distance([0.0], i, qp) for i in range(2)] == [0.0, 1.0]


def test_quantize_errors():
    with pytest.raises(TypeError):
        quantize(PointSet(np.zeros((2, 2), np.uint8)))
    with pytest.raises(ValueError):
        quantize(PointSet(np.zeros((0, 2), np.float32)))
    qp = quantize(line_points(0.0, 1.0))
    with pytest.raises(IndexError):
        quantized_distance([0.0], 2, qp)


def test_quantize_round_trip_bound():
    x = np.random.default_rng(1).standard_normal((100, 8)).astype(np.float32)
    qp = quantize(PointSet(x))
    assert (qp.lo <= qp.hi).all()
    err = np.abs(qp.dequantize() - x)
    assert (err <= (qp.hi - qp.lo) / 255 * 0.5 + 1e-6).all()


@settings(max_examples=50, deadline=None)
@given(arrays(np.float32, (12, 3), elements=finite), arrays(np.float32, 3, elements=finite))
def test_quantized_distance_error_bound(x, q):
    qp = quantize(PointSet(x))
    half = qp.step / 2 + 1e-6 * (1 + np.abs(qp.lo) + np.abs(qp.hi))
    for i in range(len(x)):
        exact = distance(q, x[i])
        gap = np.abs(q.astype(np.float64) - x[i])
        bound = float((2 * gap * half + half ** 2).sum())
        assert abs(quantized_distance(q, i, qp) - exact) <= bound * (1 + 1e-9) + 1e-9


def test_rerank_examples():
    pts = line_points(0, 1, 2, 3)
    assert rerank([1.5], [], pts, 0.25).tolist() == []
    assert rerank([1.5], [0, 3], pts, 0.25).tolist() == []
    assert rerank([1.5], [0, 1, 2, 3], pts, 0.25).tolist() == [1, 2]
    # tie at 0.25 broken by id, duplicates collapse
    assert rerank([1.5], [2, 1, 2, 1], pts, 0.25).tolist() == [1, 2]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 29), max_size=60), st.floats(0, 20))
def test_rerank_properties(cand, r):
    x = np.random.default_rng(3).standard_normal((30, 4)).astype(np.float32)
    pts = PointSet(x)
    q = np.zeros(4)
    out = rerank(q, cand, pts, r).tolist()
    assert set(out) <= set(cand)
    assert len(out) == len(set(out))
    ds = [distance(q, x[i]) for i in out]
    assert all(dv <= r for dv in ds)
    assert ds == sorted(ds)
    expected = {c for c in cand if distance(q, x[c]) <= r}
    assert set(out) == expected
