import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rangeann import (
    BuildParams,
    EarlyStopConfig,
    PointSet,
    ProximityGraph,
    beam_search,
    build_index,
    distance,
    medoid,
    quantize,
    robust_prune,
)
from conftest import line_points


def complete_graph(n, R=None):
    return ProximityGraph.from_lists([[j for j in range(n) if j != i] for i in range(n)], R or max(n - 1, 1), [0])


def test_build_params_validation():
    for kw in (dict(R=1), dict(R=8, L=4), dict(alpha=0.9)):
        with pytest.raises(ValueError):
            BuildParams(**kw)


def test_robust_prune_examples():
    pts = line_points(0, 1, 2, 10)
    assert robust_prune(0, [], 1.0, 3, pts) == []
    assert robust_prune(0, [(3, 100.0)], 1.0, 3, pts) == [3]
    cands = [(i, distance(pts.data[0], pts.data[i])) for i in (1, 2, 3)]
    assert robust_prune(0, cands, 1.0, 3, pts) == [1]


def _prune_oracle(p, cands, alpha, R, x):
    kept = []
    for c, dc in sorted(cands, key=lambda t: (t[1], t[0])):
        if len(kept) == R:
            break
        if all(alpha * float(((x[k] - x[c]) ** 2).sum()) > dc for k in kept):
            kept.append(c)
    return kept


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(1.0, 2.0), st.integers(1, 10))
def test_robust_prune_matches_rule(seed, alpha, R):
    x = np.random.default_rng(seed).standard_normal((30, 3)).astype(np.float32)
    pts = PointSet(x)
    xd = x.astype(np.float64)
    cands = [(i, float(((xd[0] - xd[i]) ** 2).sum())) for i in range(1, 30)]
    out = robust_prune(0, cands, alpha, R, pts)
    assert out == _prune_oracle(0, cands, alpha, R, xd)
    assert len(out) <= R


def test_build_single_node():
    G = build_index(line_points(3.0), BuildParams(R=4, L=8))
    assert G.n == 1 and G.degrees.tolist() == [0] and G.start.tolist() == [0]


def test_build_five_points():
    pts = PointSet(np.random.default_rng(0).standard_normal((5, 2)).astype(np.float32))
    G = build_index(pts, BuildParams(R=8, L=8))
    G.validate()
    for i in range(5):
        assert set(G.adjacency(i).tolist()) <= set(range(5)) - {i}
        assert G.degrees[i] <= 4


def test_build_empty_raises():
    with pytest.raises(ValueError):
        build_index(PointSet(np.zeros((0, 2), np.float32)))


def test_build_reachability_uniform():
    pts = PointSet(np.random.default_rng(11).random((2000, 8)).astype(np.float32))
    G = build_index(pts, BuildParams(R=32, L=64, alpha=1.15, seed=1))
    G.validate()
    out = beam_search(pts.data[0], G, pts, b=2000)
    assert len(out.visited) >= 0.99 * 2000
    # independent BFS over the adjacency
    seen = {int(G.start[0])}
    frontier = list(seen)
    while frontier:
        nxt = []
        for u in frontier:
            for v in G.adjacency(u).tolist():
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        frontier = nxt
    assert len(seen) >= 0.99 * 2000


def test_build_deterministic(small_instance):
    syn, G = small_instance
    again = build_index(syn.points, BuildParams(R=32, L=64, alpha=1.15, seed=7))
    assert again == G


def test_parallel_build_valid(small_instance):
    syn, _ = small_instance
    G = build_index(syn.points, BuildParams(R=32, L=64, alpha=1.15, seed=7, parallel=True))
    G.validate()
    out = beam_search(syn.queries.data[0], G, syn.points, b=2000)
    assert len(out.visited) >= 0.99 * syn.points.n


def test_medoid_small_set_is_exact():
    x = np.random.default_rng(5).standard_normal((50, 3)).astype(np.float32)
    xd = x.astype(np.float64)
    totals = ((xd[:, None, :] - xd[None, :, :]) ** 2).sum(-1).sum(1)
    assert medoid(PointSet(x)) == int(np.argmin(totals))


def test_beam_search_single_node():
    pts = line_points(2.0)
    G = ProximityGraph.from_lists([[]], 2, [0])
    out = beam_search([0.0], G, pts, b=3)
    assert out.beam.pairs() == [(0, 4.0)]
    assert out.visited.pairs() == [(0, 4.0)]


def test_beam_search_always_stop():
    pts = line_points(0, 1, 2, 3, 4)
    G = complete_graph(5)
    out = beam_search([2.2], G, pts, S=[0, 4], b=3, stop=lambda q, B, V, r: True)
    assert len(out.visited) == 0 and out.stopped
    assert sorted(out.beam.ids.tolist()) == [0, 4]
    # the compiled predicate with every condition trivially met
    cfg = EarlyStopConfig(enabled=True, vl=0, esr=-np.inf)
    out = beam_search([2.2], G, pts, S=[0, 4], b=3, stop=cfg)
    assert len(out.visited) == 0 and out.stopped


def test_beam_search_complete_graph_top3():
    pts = line_points(0, 1, 2, 3, 4)
    G = complete_graph(5)
    for q in (-1.0, 0.4, 2.6, 9.0):
        out = beam_search([q], G, pts, b=3)
        brute = sorted(range(5), key=lambda i: ((i - q) ** 2, i))[:3]
        assert out.beam.ids.tolist() == brute


def test_beam_search_invalid_start():
    pts = line_points(0, 1)
    G = complete_graph(2)
    with pytest.raises(IndexError):
        beam_search([0.0], G, pts, S=[5])
    with pytest.raises(ValueError):
        beam_search([0.0], G, pts, b=0)


def test_kernel_matches_python_reference(small_instance):
    syn, G = small_instance
    never = lambda q, B, V, r: False  # noqa: E731
    for qi in range(0, 200, 17):
        q = syn.queries.data[qi]
        for b in (1, 5, 32):
            fast = beam_search(q, G, syn.points, b=b)
            slow = beam_search(q, G, syn.points, b=b, stop=never)
            assert fast.visited.ids.tolist() == slow.visited.ids.tolist()
            assert fast.beam.ids.tolist() == slow.beam.ids.tolist()
            assert np.array_equal(fast.beam.distances, slow.beam.distances)


def test_beam_search_invariants(small_instance):
    syn, G = small_instance
    for qi in range(0, 200, 23):
        out = beam_search(syn.queries.data[qi], G, syn.points, b=20)
        ids, ds = out.beam
        assert len(ids) <= 20
        assert len(set(ids.tolist())) == len(ids)
        assert len(set(out.visited.ids.tolist())) == len(out.visited)
        assert all((ds[i], ids[i]) < (ds[i + 1], ids[i + 1]) for i in range(len(ids) - 1))


def test_beam_search_exhaustive(small_instance):
    syn, G = small_instance
    n = syn.points.n
    q = syn.queries.data[3]
    a = beam_search(q, G, syn.points, b=n)
    b = beam_search(q, G, syn.points, b=2 * n)
    assert len(a.visited) == n
    assert a.beam.ids.tolist() == b.beam.ids.tolist()
    exact = sorted(range(n), key=lambda i: (distance(q, syn.points.data[i]), i))
    assert a.beam.ids.tolist() == exact


def test_beam_search_quantized_distances(small_instance):
    syn, G = small_instance
    qp = quantize(syn.points)
    out = beam_search(syn.queries.data[0], G, syn.points, b=10, quantized=qp)
    deq = qp.dequantize()
    for i, dq in out.beam.pairs():
        assert dq == pytest.approx(((deq[i] - syn.queries.data[0].astype(np.float64)) ** 2).sum(), rel=1e-9)
