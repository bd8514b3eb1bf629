"""Vamana proximity graph construction and beam search."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numba
import numpy as np
from numba import prange

from .core import PointSet, QuantizedPointSet, dist_kernel, point_dist, sort_by_distance
from .early_stop import EarlyStopConfig, should_stop

SEEN = 1
IN_BEAM = 2
VISITED = 4

MEDOID_SAMPLE = 1000


@dataclass(frozen=True)
class BuildParams:
    R: int = 64
    L: int = 128
    alpha: float = 1.15
    seed: int = 0
    parallel: bool = False

    def __post_init__(self):
        if self.R < 2:
            raise ValueError("R must be at least 2")
        if self.L < self.R:
            raise ValueError("L must be at least R")
        if self.alpha < 1.0:
            raise ValueError("alpha must be at least 1.0")


@dataclass(eq=False)
class ProximityGraph:
    """Fixed-width adjacency: row ``i`` of ``neighbors`` holds ``degrees[i]`` ids."""

    neighbors: np.ndarray
    degrees: np.ndarray
    start: np.ndarray

    @property
    def n(self) -> int:
        return self.neighbors.shape[0]

    @property
    def R(self) -> int:
        return self.neighbors.shape[1]

    def adjacency(self, i: int) -> np.ndarray:
        return self.neighbors[i, : self.degrees[i]]

    @classmethod
    def from_lists(cls, lists, R: int, start) -> "ProximityGraph":
        n = len(lists)
        nbrs = np.zeros((n, R), dtype=np.int32)
        degs = np.zeros(n, dtype=np.int32)
        for i, row in enumerate(lists):
            row = list(row)
            if len(row) > R:
                raise ValueError(f"node {i} has degree {len(row)} > R={R}")
            nbrs[i, : len(row)] = row
            degs[i] = len(row)
        return cls(nbrs, degs, np.asarray(start, dtype=np.int32))

    def validate(self) -> None:
        if self.degrees.shape != (self.n,) or (self.degrees > self.R).any():
            raise ValueError("degree bound violated")
        if self.n and self.start.size == 0:
            raise ValueError("graph has no start point")
        if ((self.start < 0) | (self.start >= self.n)).any():
            raise ValueError("start id out of range")
        for i in range(self.n):
            row = self.adjacency(i)
            if ((row < 0) | (row >= self.n)).any():
                raise ValueError(f"node {i} has an out-of-range neighbor")
            if (row == i).any():
                raise ValueError(f"node {i} has a self-loop")
            if np.unique(row).size != row.size:
                raise ValueError(f"node {i} has duplicate neighbors")

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProximityGraph) or other.neighbors.shape != self.neighbors.shape:
            return False
        if not np.array_equal(self.degrees, other.degrees):
            return False
        if not np.array_equal(self.start, other.start):
            return False
        mask = np.arange(self.R)[None, :] < self.degrees[:, None]
        return bool(np.array_equal(self.neighbors[mask], other.neighbors[mask]))


class Neighbors(NamedTuple):
    ids: np.ndarray
    distances: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)

    def pairs(self) -> list[tuple[int, float]]:
        return [(int(i), float(d)) for i, d in zip(self.ids, self.distances)]


class SearchOutcome(NamedTuple):
    beam: Neighbors
    visited: Neighbors
    dist_comps: int
    stopped: bool


# kernels ---------------------------------------------------------------------


@numba.njit(cache=True, nogil=True)
def beam_search_kernel(q, data, kind, lo, step, nbrs, degs, start_ids, start_d,
                       b, metric, r, vl, esr):
    """Best-first search keeping the ``b`` closest candidates.

    ``start_d`` entries that are NaN are computed. A node trimmed from the beam
    is never re-admitted: it lost to ``b`` closer beam members, which only get
    replaced by still closer ones.
    """
    n = data.shape[0]
    R = nbrs.shape[1]
    state = np.zeros(n, np.uint8)
    ns = start_ids.shape[0]
    cap = max(b, ns) + R + 1
    ids = np.empty(cap, np.int64)
    ds = np.empty(cap, np.float64)
    tmp_ids = np.empty(cap, np.int64)
    tmp_ds = np.empty(cap, np.float64)
    cand_ids = np.empty(R, np.int64)
    cand_ds = np.empty(R, np.float64)
    vis_ids = np.empty(max(16, 2 * b), np.int64)
    vis_d = np.empty(max(16, 2 * b), np.float64)
    comps = 0

    m = 0
    d_start = np.nan
    for k in range(ns):
        s = start_ids[k]
        if state[s] & SEEN:
            continue
        state[s] = SEEN | IN_BEAM
        dk = start_d[k]
        if np.isnan(dk):
            dk = point_dist(q, data, s, kind, lo, step)
            comps += 1
        if m == 0:
            d_start = dk
        ids[m] = s
        ds[m] = dk
        m += 1
    order = sort_by_distance(ids[:m], ds[:m])
    ids[:m] = ids[:m][order]
    ds[:m] = ds[:m][order]

    nv = 0
    pos = 0
    stopped = False
    while True:
        while pos < m and (state[ids[pos]] & VISITED):
            pos += 1
        if pos >= m:
            break
        if should_stop(metric, ds, m, pos, nv, r, vl, esr, d_start, vis_ids, vis_d, state):
            stopped = True
            break
        p = ids[pos]
        state[p] |= VISITED
        if nv == vis_ids.shape[0]:
            vis_ids = np.concatenate((vis_ids, np.empty(nv, np.int64)))
            vis_d = np.concatenate((vis_d, np.empty(nv, np.float64)))
        vis_ids[nv] = p
        vis_d[nv] = ds[pos]
        nv += 1

        c = 0
        for k in range(degs[p]):
            u = nbrs[p, k]
            if state[u] & SEEN:
                continue
            state[u] |= SEEN
            du = point_dist(q, data, u, kind, lo, step)
            comps += 1
            # insertion sort by (distance, id)
            j = c
            while j > 0 and (cand_ds[j - 1] > du or (cand_ds[j - 1] == du and cand_ids[j - 1] > u)):
                cand_ds[j] = cand_ds[j - 1]
                cand_ids[j] = cand_ids[j - 1]
                j -= 1
            cand_ds[j] = du
            cand_ids[j] = u
            c += 1
        if c == 0 and m <= b:
            continue

        total = min(m + c, b)
        i = 0
        j = 0
        first_new = total
        for t in range(total):
            take_cand = False
            if j < c:
                if i >= m:
                    take_cand = True
                elif cand_ds[j] < ds[i] or (cand_ds[j] == ds[i] and cand_ids[j] < ids[i]):
                    take_cand = True
            if take_cand:
                tmp_ids[t] = cand_ids[j]
                tmp_ds[t] = cand_ds[j]
                state[cand_ids[j]] |= IN_BEAM
                if t < first_new:
                    first_new = t
                j += 1
            else:
                tmp_ids[t] = ids[i]
                tmp_ds[t] = ds[i]
                i += 1
        for t in range(i, m):
            state[ids[t]] &= ~IN_BEAM
        ids, tmp_ids = tmp_ids, ids
        ds, tmp_ds = tmp_ds, ds
        m = total
        if first_new < pos:
            pos = first_new
        if pos > m:
            pos = m

    return ids[:m].copy(), ds[:m].copy(), vis_ids[:nv].copy(), vis_d[:nv].copy(), comps, stopped


@numba.njit(cache=True, nogil=True)
def robust_prune_kernel(p, cand_ids, cand_ds, data, kind, alpha, R):
    order = sort_by_distance(cand_ids, cand_ds)
    kept = np.empty(R, np.int64)
    nk = 0
    prev = -1
    for t in range(order.shape[0]):
        if nk >= R:
            break
        c = cand_ids[order[t]]
        if c == p or c == prev:
            continue
        prev = c
        dpc = cand_ds[order[t]]
        ok = True
        for k in range(nk):
            if kept[k] == c:
                ok = False
                break
            if alpha * dist_kernel(data[kept[k]], data[c], kind) <= dpc:
                ok = False
                break
        if ok:
            kept[nk] = c
            nk += 1
    return kept[:nk].copy()


@numba.njit(cache=True, nogil=True)
def _prune_candidates(p, vis_ids, vis_d, data, kind, nbrs, degs):
    """Visited set plus current out-neighbors of ``p``, with distances to ``p``."""
    dp = degs[p]
    ids = np.empty(vis_ids.shape[0] + dp, np.int64)
    ds = np.empty(vis_ids.shape[0] + dp, np.float64)
    m = 0
    for k in range(vis_ids.shape[0]):
        if vis_ids[k] != p:
            ids[m] = vis_ids[k]
            ds[m] = vis_d[k]
            m += 1
    for k in range(dp):
        u = nbrs[p, k]
        ids[m] = u
        ds[m] = dist_kernel(data[p], data[u], kind)
        m += 1
    return ids[:m], ds[:m]


@numba.njit(cache=True, nogil=True)
def _search_for_insert(p, data, kind, nbrs, degs, start, L):
    q = data[p].astype(np.float64)
    empty = np.empty(0, np.float64)
    start_d = np.full(start.shape[0], np.nan)
    res = beam_search_kernel(q, data, kind, empty, empty, nbrs, degs, start, start_d,
                             L, 0, 0.0, 0, 0.0)
    return res[2], res[3]


@numba.njit(cache=True, nogil=True)
def _add_reverse_edges(j, sources, data, kind, nbrs, degs, alpha, R):
    dj = degs[j]
    extra = 0
    for s in sources:
        dup = False
        for k in range(dj):
            if nbrs[j, k] == s:
                dup = True
                break
        if not dup:
            extra += 1
    if extra == 0:
        return
    if dj + extra <= R:
        for s in sources:
            dup = False
            for k in range(degs[j]):
                if nbrs[j, k] == s:
                    dup = True
                    break
            if not dup:
                nbrs[j, degs[j]] = s
                degs[j] += 1
        return
    ids = np.empty(dj + sources.shape[0], np.int64)
    ds = np.empty(dj + sources.shape[0], np.float64)
    for k in range(dj):
        ids[k] = nbrs[j, k]
        ds[k] = dist_kernel(data[j], data[ids[k]], kind)
    for k in range(sources.shape[0]):
        ids[dj + k] = sources[k]
        ds[dj + k] = dist_kernel(data[j], data[sources[k]], kind)
    kept = robust_prune_kernel(j, ids, ds, data, kind, alpha, R)
    degs[j] = kept.shape[0]
    for k in range(kept.shape[0]):
        nbrs[j, k] = kept[k]


@numba.njit(cache=True, nogil=True)
def _vamana_pass(data, kind, nbrs, degs, order, start, R, L, alpha):
    one = np.empty(1, np.int64)
    for p in order:
        vis_ids, vis_d = _search_for_insert(p, data, kind, nbrs, degs, start, L)
        cids, cds = _prune_candidates(p, vis_ids, vis_d, data, kind, nbrs, degs)
        kept = robust_prune_kernel(p, cids, cds, data, kind, alpha, R)
        degs[p] = kept.shape[0]
        for k in range(kept.shape[0]):
            nbrs[p, k] = kept[k]
        for k in range(kept.shape[0]):
            one[0] = p
            _add_reverse_edges(kept[k], one, data, kind, nbrs, degs, alpha, R)


@numba.njit(cache=True, parallel=True)
def _batch_insert(data, kind, nbrs, degs, batch, start, R, L, alpha):
    B = batch.shape[0]
    out = np.empty((B, R), np.int64)
    out_deg = np.zeros(B, np.int64)
    for i in prange(B):
        p = batch[i]
        vis_ids, vis_d = _search_for_insert(p, data, kind, nbrs, degs, start, L)
        cids, cds = _prune_candidates(p, vis_ids, vis_d, data, kind, nbrs, degs)
        kept = robust_prune_kernel(p, cids, cds, data, kind, alpha, R)
        out_deg[i] = kept.shape[0]
        out[i, : kept.shape[0]] = kept
    for i in range(B):
        p = batch[i]
        degs[p] = out_deg[i]
        for k in range(out_deg[i]):
            nbrs[p, k] = out[i, k]
    total = out_deg.sum()
    if total == 0:
        return
    tgt = np.empty(total, np.int64)
    src = np.empty(total, np.int64)
    t = 0
    for i in range(B):
        for k in range(out_deg[i]):
            tgt[t] = out[i, k]
            src[t] = batch[i]
            t += 1
    order = np.argsort(tgt, kind="mergesort")
    tgt = tgt[order]
    src = src[order]
    bounds = [0]
    for t in range(1, total):
        if tgt[t] != tgt[t - 1]:
            bounds.append(t)
    bounds.append(total)
    nb = len(bounds) - 1
    bnd = np.array(bounds)
    for g in prange(nb):
        lo_ = bnd[g]
        hi_ = bnd[g + 1]
        _add_reverse_edges(tgt[lo_], src[lo_:hi_], data, kind, nbrs, degs, alpha, R)


@numba.njit(cache=True, nogil=True)
def _medoid(data, kind, sample):
    best = 0
    best_total = np.inf
    for i in range(data.shape[0]):
        total = 0.0
        for s in sample:
            total += dist_kernel(data[i], data[s], kind)
        if total < best_total:
            best_total = total
            best = i
    return best


# public API ------------------------------------------------------------------


def robust_prune(p: int, candidates, alpha: float, R: int, points: PointSet) -> list[int]:
    """Alpha-occlusion pruning of ``(id, distance-to-p)`` candidates down to R ids."""
    candidates = list(candidates)
    if not candidates:
        return []
    ids = np.array([c[0] for c in candidates], dtype=np.int64)
    ds = np.array([c[1] for c in candidates], dtype=np.float64)
    kept = robust_prune_kernel(int(p), ids, ds, points.data, int(points.metric), float(alpha), int(R))
    return [int(i) for i in kept]


def medoid(points: PointSet, seed: int = 0) -> int:
    rng = np.random.default_rng(seed)
    if points.n <= MEDOID_SAMPLE:
        sample = np.arange(points.n, dtype=np.int64)
    else:
        sample = np.sort(rng.choice(points.n, MEDOID_SAMPLE, replace=False)).astype(np.int64)
    return int(_medoid(points.data, int(points.metric), sample))


def build_index(points: PointSet, params: BuildParams = BuildParams()) -> ProximityGraph:
    """Two-pass Vamana build (alpha=1 then ``params.alpha``) from the medoid."""
    n = points.n
    if n == 0:
        raise ValueError("cannot build an index over an empty point set")
    R = params.R
    nbrs = np.zeros((n, R), dtype=np.int32)
    degs = np.zeros(n, dtype=np.int32)
    start = np.array([medoid(points, params.seed)], dtype=np.int64)
    rng = np.random.default_rng(params.seed)
    kind = int(points.metric)
    for alpha in (1.0, params.alpha):
        order = rng.permutation(n).astype(np.int64)
        if params.parallel:
            _parallel_pass(points.data, kind, nbrs, degs, order, start, R, params.L, alpha)
        else:
            _vamana_pass(points.data, kind, nbrs, degs, order, start, R, params.L, alpha)
    return ProximityGraph(nbrs, degs, start.astype(np.int32))


def _parallel_pass(data, kind, nbrs, degs, order, start, R, L, alpha):
    # prefix-doubling batches, capped at 2% of n
    n = order.shape[0]
    cap = max(1, math.ceil(0.02 * n))
    lo, size = 0, 1
    while lo < n:
        hi = min(n, lo + size)
        _batch_insert(data, kind, nbrs, degs, order[lo:hi], start, R, L, alpha)
        lo = hi
        size = min(2 * size, cap)


def search_arrays(points: PointSet, quantized: QuantizedPointSet | None):
    """``(rows, lo, step)`` the kernels search over; empty ``lo`` means exact."""
    if quantized is None:
        empty = np.empty(0, np.float64)
        return points.data, empty, empty
    if quantized.source is not points and (quantized.n, quantized.d) != (points.n, points.d):
        raise ValueError("quantized set does not match the point set")
    return quantized.codes, quantized.lo, quantized.step


def _query_vector(q, d: int) -> np.ndarray:
    q = np.ascontiguousarray(np.asarray(q, dtype=np.float64).reshape(-1))
    if q.shape[0] != d:
        raise ValueError(f"dimension mismatch: {q.shape[0]} != {d}")
    return q


def _start_ids(S, n: int) -> np.ndarray:
    S = np.asarray(S, dtype=np.int64).reshape(-1)
    if S.size == 0:
        raise ValueError("beam search needs at least one start point")
    if (S < 0).any() or (S >= n).any():
        raise IndexError("start id out of range")
    return S


def beam_search(q, G: ProximityGraph, points: PointSet, S=None, r: float = -math.inf,
                b: int = 10, stop: EarlyStopConfig | Callable | None = None,
                quantized: QuantizedPointSet | None = None) -> SearchOutcome:
    """Beam search from ``S`` (default: the graph's start points).

    ``stop`` is either an :class:`EarlyStopConfig`, evaluated inside the
    compiled kernel, or any callable ``stop(q, beam, visited, r) -> bool``
    taking :class:`Neighbors` and run by the pure Python implementation.
    """
    if b < 1:
        raise ValueError("beam width must be at least 1")
    q = _query_vector(q, points.d)
    S = _start_ids(G.start if S is None else S, points.n)
    rows, lo, step = search_arrays(points, quantized)
    if callable(stop):
        return _beam_search_py(q, G, rows, int(points.metric), lo, step, S, r, b, stop)
    cfg = stop or EarlyStopConfig()
    beam_ids, beam_d, vis_ids, vis_d, comps, stopped = beam_search_kernel(
        q, rows, int(points.metric), lo, step, G.neighbors, G.degrees, S,
        np.full(S.shape[0], np.nan), int(b), cfg.kernel_metric, float(r), int(cfg.vl), float(cfg.esr))
    return SearchOutcome(Neighbors(beam_ids, beam_d), Neighbors(vis_ids, vis_d), int(comps), bool(stopped))


def _as_neighbors(m: dict) -> Neighbors:
    return Neighbors(np.fromiter(m.keys(), np.int64, len(m)), np.fromiter(m.values(), np.float64, len(m)))


def _beam_search_py(q, G, rows, kind, lo, step, S, r, b, stop) -> SearchOutcome:
    cache: dict[int, float] = {}

    def dist(i):
        if i not in cache:
            cache[i] = point_dist(q, rows, i, kind, lo, step)
        return cache[i]

    beam = {int(s): dist(int(s)) for s in S}
    visited: dict[int, float] = {}
    stopped = False
    while True:
        frontier = [(d, i) for i, d in beam.items() if i not in visited]
        if not frontier:
            break
        d_star, p_star = min(frontier)
        if stop(q, _as_neighbors(beam), _as_neighbors(visited), r):
            stopped = True
            break
        visited[p_star] = d_star
        for u in G.adjacency(p_star):
            u = int(u)
            if u not in visited:
                beam[u] = dist(u)
        if len(beam) > b:
            beam = {i: d for d, i in sorted((d, i) for i, d in beam.items())[:b]}
    ordered = sorted((d, i) for i, d in beam.items())
    beam_n = Neighbors(np.array([i for _, i in ordered], np.int64), np.array([d for d, _ in ordered], np.float64))
    return SearchOutcome(beam_n, _as_neighbors(visited), len(cache), stopped)
