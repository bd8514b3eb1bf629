"""Range retrieval over a proximity graph.

Three strategies share an initial beam search:

* ``baseline`` returns the in-range members of the beam;
* ``greedy`` expands from a saturated beam through in-range neighbors only,
  with an unbounded frontier;
* ``doubling`` reruns the beam search with twice the width, seeded with
  everything visited so far, until the beam stops saturating.

A beam counts as saturated when at least ``ceil(lambda * b)`` of its members
are within the radius.
"""

from __future__ import annotations

import enum
import heapq
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .core import PointSet, QuantizedPointSet, dist_kernel, rerank_kernel, sort_by_distance
from .early_stop import EarlyStopConfig, StopMetric, early_stop_example  # noqa: F401
from .graph import (
    BuildParams,
    Neighbors,
    ProximityGraph,
    _query_vector,
    _start_ids,
    beam_search_kernel,
    search_arrays,
)


class Strategy(enum.IntEnum):
    BASELINE = 0
    GREEDY = 1
    DOUBLING = 2

    @classmethod
    def parse(cls, value) -> "Strategy":
        if isinstance(value, Strategy):
            return value
        try:
            return cls[str(value).strip().upper()]
        except KeyError:
            raise ValueError(f"unknown strategy {value!r}") from None

    def __str__(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class RangeParams:
    r: float
    b: int = 10
    lam: float = 1.0
    strategy: Strategy = Strategy.GREEDY
    early_stop: EarlyStopConfig = field(default_factory=EarlyStopConfig)

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy.parse(self.strategy))
        if self.b < 1:
            raise ValueError("beam width must be at least 1")
        if not 0.0 < self.lam <= 1.0:
            raise ValueError("lambda must lie in (0, 1]")

    @property
    def threshold(self) -> int:
        """In-range count at which a beam of width ``b`` counts as saturated."""
        return saturation_threshold(self.lam, self.b)


def saturation_threshold(lam: float, b: int) -> int:
    # tolerate float noise such as 0.3 * 10 = 3.0000000000000004
    return max(1, math.ceil(lam * b - 1e-9))


@dataclass(frozen=True)
class Preset:
    build: BuildParams
    radius: float
    esr: float
    metric: str = "l2"


# Build parameters, radii and early-stopping thresholds used for the public
# benchmark datasets. Euclidean radii are squared.
PRESETS = {
    "bigann": Preset(BuildParams(64, 128, 1.15), 10000.0, 10000.0),
    "deep": Preset(BuildParams(64, 128, 1.15), 0.02, 0.4),
    "msturing": Preset(BuildParams(64, 128, 1.15), 0.3, 1.6),
    "gist": Preset(BuildParams(64, 128, 1.15), 0.5, 2.5),
    "ssnpp": Preset(BuildParams(80, 200, 1.1), 96237.0, 200000.0),
    "openai": Preset(BuildParams(64, 128, 1.15), 0.2, 0.28),
    "text2image": Preset(BuildParams(64, 128, 1.0), -0.6, -1.0, "ip"),
    "wikipedia": Preset(BuildParams(64, 128, 1.0), -10.5, -9.5, "ip"),
    "msmarco": Preset(BuildParams(64, 128, 1.0), -62.0, -57.0, "ip"),
}


# per-query statistics columns
INITIAL_VISITS, SECOND_VISITS, DIST_COMPS, EARLY_STOPPED, ROUNDS, FINAL_BEAM = range(6)
STAT_NAMES = ("initial_visits", "second_visits", "dist_comps", "early_stopped", "rounds", "final_beam")


@dataclass
class QueryResult:
    ids: np.ndarray
    distances: np.ndarray
    stats: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def early_stopped(self) -> bool:
        return bool(self.stats[EARLY_STOPPED])

    @property
    def rounds(self) -> int:
        return int(self.stats[ROUNDS])

    @property
    def dist_comps(self) -> int:
        return int(self.stats[DIST_COMPS])

    @property
    def initial_visits(self) -> int:
        return int(self.stats[INITIAL_VISITS])

    @property
    def second_visits(self) -> int:
        return int(self.stats[SECOND_VISITS])

    @property
    def final_beam(self) -> int:
        return int(self.stats[FINAL_BEAM])


@dataclass
class RangeResult:
    """Per-query result lists, each sorted by (distance, id), plus statistics."""

    ids: list[np.ndarray]
    distances: list[np.ndarray]
    stats: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)

    def __getitem__(self, i: int) -> QueryResult:
        return QueryResult(self.ids[i], self.distances[i], self.stats[i])

    @classmethod
    def from_queries(cls, results: list[QueryResult]) -> "RangeResult":
        stats = np.array([r.stats for r in results], dtype=np.int64).reshape(len(results), len(STAT_NAMES))
        return cls([r.ids for r in results], [r.distances for r in results], stats)

    def totals(self) -> dict[str, int]:
        return {name: int(self.stats[:, k].sum()) for k, name in enumerate(STAT_NAMES)}

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(x) for x in self.ids], dtype=np.int64)


# kernels ---------------------------------------------------------------------


@numba.njit(cache=True, nogil=True)
def greedy_kernel(q, data, kind, nbrs, degs, start_ids, start_d, r):
    """Expand from ``start_ids``, admitting neighbors only when within ``r``.

    Returns the visited set in visit order, its exact distances and the number
    of distances computed. A rejected neighbor is never re-tested since its
    distance cannot change.
    """
    n = data.shape[0]
    seen = np.zeros(n, np.uint8)
    heap = [(0.0, np.int64(0))]
    heap.pop()
    comps = 0
    for k in range(start_ids.shape[0]):
        s = start_ids[k]
        if seen[s]:
            continue
        seen[s] = 1
        ds = start_d[k]
        if np.isnan(ds):
            ds = dist_kernel(q, data[s], kind)
            comps += 1
        heapq.heappush(heap, (ds, np.int64(s)))
    vis_ids = np.empty(max(16, 2 * len(heap)), np.int64)
    vis_d = np.empty(vis_ids.shape[0], np.float64)
    nv = 0
    while len(heap) > 0:
        dp, p = heapq.heappop(heap)
        if nv == vis_ids.shape[0]:
            vis_ids = np.concatenate((vis_ids, np.empty(nv, np.int64)))
            vis_d = np.concatenate((vis_d, np.empty(nv, np.float64)))
        vis_ids[nv] = p
        vis_d[nv] = dp
        nv += 1
        for k in range(degs[p]):
            u = nbrs[p, k]
            if seen[u]:
                continue
            seen[u] = 1
            du = dist_kernel(q, data[u], kind)
            comps += 1
            if du <= r:
                heapq.heappush(heap, (du, np.int64(u)))
    return vis_ids[:nv].copy(), vis_d[:nv].copy(), comps


@numba.njit(cache=True, nogil=True)
def _in_range_beam(q, exact, kind, quantized, beam_ids, beam_d, r):
    """Members of a beam within ``r`` by exact distance, sorted."""
    if quantized:
        ids, ds = rerank_kernel(q, exact, kind, beam_ids, r)
        return ids, ds, beam_ids.shape[0]
    keep = beam_d <= r
    ids = beam_ids[keep]
    ds = beam_d[keep]
    order = sort_by_distance(ids, ds)
    return ids[order], ds[order], 0


@numba.njit(cache=True, nogil=True)
def range_query_kernel(q, exact, search, kind, lo, step, nbrs, degs, start, strategy,
                       b, threshold_frac, metric, r, vl, esr):
    n = exact.shape[0]
    quantized = lo.shape[0] > 0
    stats = np.zeros(6, np.int64)
    start_d = np.full(start.shape[0], np.nan)
    beam_ids, beam_d, vis_ids, vis_d, comps, stopped = beam_search_kernel(
        q, search, kind, lo, step, nbrs, degs, start, start_d, b, metric, r, vl, esr)
    ids, ds, extra = _in_range_beam(q, exact, kind, quantized, beam_ids, beam_d, r)
    stats[INITIAL_VISITS] = vis_ids.shape[0]
    stats[DIST_COMPS] = comps + extra
    stats[EARLY_STOPPED] = 1 if stopped else 0
    stats[ROUNDS] = 1
    stats[FINAL_BEAM] = b

    if strategy == 1:
        if ids.shape[0] >= _threshold(threshold_frac, b):
            g_ids, g_d, g_comps = greedy_kernel(q, exact, kind, nbrs, degs, ids, ds, r)
            stats[SECOND_VISITS] = g_ids.shape[0]
            stats[DIST_COMPS] += g_comps
            stats[ROUNDS] = 2
            keep = g_d <= r
            g_ids = g_ids[keep]
            g_d = g_d[keep]
            order = sort_by_distance(g_ids, g_d)
            ids = g_ids[order]
            ds = g_d[order]
    elif strategy == 2:
        in_s = np.zeros(n, np.uint8)
        s_ids = np.empty(start.shape[0] + vis_ids.shape[0], np.int64)
        s_d = np.empty(s_ids.shape[0], np.float64)
        ns = 0
        for k in range(start.shape[0]):
            if not in_s[start[k]]:
                in_s[start[k]] = 1
                s_ids[ns] = start[k]
                s_d[ns] = np.nan
                ns += 1
        bw = b
        while ids.shape[0] >= _threshold(threshold_frac, bw) and bw < n:
            # S <- S u V, reusing the distances already known for V
            if ns + vis_ids.shape[0] > s_ids.shape[0]:
                s_ids = np.concatenate((s_ids, np.empty(ns + vis_ids.shape[0], np.int64)))
                s_d = np.concatenate((s_d, np.empty(ns + vis_ids.shape[0], np.float64)))
            for k in range(vis_ids.shape[0]):
                v = vis_ids[k]
                if not in_s[v]:
                    in_s[v] = 1
                    s_ids[ns] = v
                    s_d[ns] = vis_d[k]
                    ns += 1
            bw = min(2 * bw, n)
            beam_ids, beam_d, vis_ids, vis_d, comps, stopped = beam_search_kernel(
                q, search, kind, lo, step, nbrs, degs, s_ids[:ns], s_d[:ns], bw, 0, r, 0, 0.0)
            ids, ds, extra = _in_range_beam(q, exact, kind, quantized, beam_ids, beam_d, r)
            stats[SECOND_VISITS] += vis_ids.shape[0]
            stats[DIST_COMPS] += comps + extra
            stats[ROUNDS] += 1
            stats[FINAL_BEAM] = bw
    return ids, ds, stats


@numba.njit(cache=True, nogil=True)
def _threshold(frac, b):
    return max(1, np.int64(np.ceil(frac * b - 1e-9)))


# public API ------------------------------------------------------------------


def greedy_search(q, G: ProximityGraph, points: PointSet, S, r: float) -> Neighbors:
    """Visited set of an unbounded expansion restricted to the radius-``r`` ball.

    Start points are always visited whatever their distance. Distances are
    exact. The result is sorted by (distance, id).
    """
    q = _query_vector(q, points.d)
    S = np.asarray(S, dtype=np.int64).reshape(-1)
    if S.size and ((S < 0).any() or (S >= points.n).any()):
        raise IndexError("start id out of range")
    ids, ds, _ = greedy_kernel(q, points.data, int(points.metric), G.neighbors, G.degrees,
                               S, np.full(S.shape[0], np.nan), float(r))
    order = sort_by_distance(ids, ds)
    return Neighbors(ids[order], ds[order])


def _kernel_args(G: ProximityGraph, points: PointSet, params: RangeParams,
                 quantized: QuantizedPointSet | None):
    rows, lo, step = search_arrays(points, quantized)
    start = _start_ids(G.start, points.n)
    es = params.early_stop
    return (points.data, rows, int(points.metric), lo, step, G.neighbors, G.degrees, start,
            int(params.strategy), int(params.b), float(params.lam), es.kernel_metric,
            float(params.r), int(es.vl), float(es.esr))


def _run(q, args) -> QueryResult:
    exact, rows, kind, lo, step, nbrs, degs, start, *rest = args
    ids, ds, stats = range_query_kernel(q, exact, rows, kind, lo, step, nbrs, degs, start, *rest)
    return QueryResult(ids, ds, stats)


def doubling_search(q, G: ProximityGraph, points: PointSet, S, params: RangeParams,
                    quantized: QuantizedPointSet | None = None) -> QueryResult:
    """Doubling beam search from ``S``; early stopping applies to the first round only."""
    q = _query_vector(q, points.d)
    args = list(_kernel_args(G, points, params, quantized))
    args[7] = _start_ids(G.start if S is None else S, points.n)
    args[8] = int(Strategy.DOUBLING)
    return _run(q, args)


def range_query(q, G: ProximityGraph, points: PointSet, params: RangeParams,
                quantized: QuantizedPointSet | None = None) -> QueryResult:
    """All points reported within ``params.r`` of ``q``, by exact distance."""
    q = _query_vector(q, points.d)
    return _run(q, _kernel_args(G, points, params, quantized))


def batch_range_search(Q, G: ProximityGraph, points: PointSet, params: RangeParams,
                       quantized: QuantizedPointSet | None = None,
                       threads: int | None = None) -> RangeResult:
    """:func:`range_query` over every row of ``Q``; results keep query order."""
    Qf = Q.as_queries() if isinstance(Q, PointSet) else np.asarray(Q, dtype=np.float64)
    if Qf.ndim != 2:
        Qf = Qf.reshape(-1, points.d)
    if Qf.shape[0] and Qf.shape[1] != points.d:
        raise ValueError(f"dimension mismatch: queries have d={Qf.shape[1]}, points have d={points.d}")
    Qf = np.ascontiguousarray(Qf)
    args = _kernel_args(G, points, params, quantized)
    threads = threads or os.cpu_count() or 1
    if threads == 1 or len(Qf) < 2:
        results = [_run(q, args) for q in Qf]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda q: _run(q, args), Qf, chunksize=16))
    return RangeResult.from_queries(results)
