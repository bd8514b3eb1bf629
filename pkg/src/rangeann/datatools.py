"""Dataset characterization and synthetic range-search datasets."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numba
import numpy as np
from numba import prange

from .core import PointSet, dist_kernel, point_dist
from .early_stop import StopMetric
from .graph import ProximityGraph, beam_search_kernel, search_arrays

BUCKET_BOUNDS = (0, 10, 100, 1000, 10_000, 100_000)


@dataclass
class CaptureCurve:
    radii: np.ndarray
    fraction: np.ndarray

    def normalized_radii(self) -> np.ndarray:
        """Radii mapped linearly onto [0, 1] for overlaying datasets."""
        lo, hi = self.radii.min(), self.radii.max()
        if hi == lo:
            return np.zeros_like(self.radii, dtype=np.float64)
        return (self.radii - lo) / (hi - lo)

    def rows(self):
        return [(float(r), float(f)) for r, f in zip(self.radii, self.fraction)]


@dataclass
class FrequencyTable:
    bounds: tuple
    counts: np.ndarray
    overflow: int = 0

    @property
    def has_overflow(self) -> bool:
        return self.overflow > 0

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.overflow

    def labels(self) -> list[str]:
        names = ["0"] + [f"<={b}" for b in self.bounds[1:]]
        if self.has_overflow:
            names.append(f">{self.bounds[-1]}")
        return names

    def rows(self):
        values = list(map(int, self.counts)) + ([self.overflow] if self.has_overflow else [])
        return list(zip(self.labels(), values))


@numba.njit(cache=True, parallel=True)
def _capture_counts(Q, data, kind, radii):
    out = np.zeros((Q.shape[0], radii.shape[0]), np.int64)
    for i in prange(Q.shape[0]):
        ds = np.empty(data.shape[0], np.float64)
        for j in range(data.shape[0]):
            ds[j] = dist_kernel(Q[i], data[j], kind)
        ds.sort()
        out[i] = np.searchsorted(ds, radii, side="right")
    return out


def _sample_rows(points: PointSet, sample: int, seed: int) -> np.ndarray:
    if sample <= 0 or sample >= points.n:
        return points.data
    rng = np.random.default_rng(seed)
    return points.data[np.sort(rng.choice(points.n, sample, replace=False))]


def percent_captured(points: PointSet, Q, radii, sample: int = 0, seed: int = 0) -> CaptureCurve:
    """Mean fraction of the dataset inside the radius ball, per radius.

    ``sample > 0`` estimates the fraction over a seeded subset of the points.
    """
    radii = np.asarray(radii, dtype=np.float64).reshape(-1)
    if radii.size == 0:
        raise ValueError("need at least one radius")
    if np.any(np.diff(radii) < 0):
        raise ValueError("radii must be ascending")
    Qf = Q.as_queries() if isinstance(Q, PointSet) else np.atleast_2d(np.asarray(Q, dtype=np.float64))
    rows = _sample_rows(points, sample, seed)
    if len(Qf) == 0 or len(rows) == 0:
        return CaptureCurve(radii, np.zeros_like(radii))
    counts = _capture_counts(np.ascontiguousarray(Qf), rows, int(points.metric), radii)
    return CaptureCurve(radii, counts.mean(axis=0) / len(rows))


@numba.njit(cache=True, parallel=True)
def _distance_extremes(Q, data, kind):
    lo = np.full(Q.shape[0], np.inf)
    hi = np.full(Q.shape[0], -np.inf)
    for i in prange(Q.shape[0]):
        for j in range(data.shape[0]):
            dij = dist_kernel(Q[i], data[j], kind)
            lo[i] = min(lo[i], dij)
            hi[i] = max(hi[i], dij)
    return lo, hi


def capture_radii(points: PointSet, Q, num: int = 50, sample: int = 0, seed: int = 0) -> np.ndarray:
    """Evenly spaced radii from the largest with 0% capture to the smallest with 100%."""
    Qf = Q.as_queries() if isinstance(Q, PointSet) else np.atleast_2d(np.asarray(Q, dtype=np.float64))
    rows = _sample_rows(points, sample, seed)
    lo, hi = _distance_extremes(np.ascontiguousarray(Qf), rows, int(points.metric))
    return np.linspace(lo.min(), hi.max(), num)


def frequency_distribution(gt) -> FrequencyTable:
    """Bucket per-query result counts: 0, (0,10], (10,100], ... (10^4,10^5].

    Accepts a ground truth, a search result, or a plain sequence of sizes.
    """
    if hasattr(gt, "sizes"):
        sizes = np.asarray(gt.sizes, dtype=np.int64)
    else:
        sizes = np.asarray(gt, dtype=np.int64).reshape(-1)
    counts = np.zeros(len(BUCKET_BOUNDS), dtype=np.int64)
    counts[0] = int((sizes == 0).sum())
    for k in range(1, len(BUCKET_BOUNDS)):
        counts[k] = int(((sizes > BUCKET_BOUNDS[k - 1]) & (sizes <= BUCKET_BOUNDS[k])).sum())
    overflow = int((sizes > BUCKET_BOUNDS[-1]).sum())
    if overflow:
        warnings.warn(f"{overflow} queries have more than {BUCKET_BOUNDS[-1]} results", stacklevel=2)
    return FrequencyTable(BUCKET_BOUNDS, counts, overflow)


class SyntheticData(NamedTuple):
    points: PointSet
    queries: PointSet
    radii: dict


def synth_clustered(n: int, d: int, clusters: int, spread: float = 0.1, seed: int = 0,
                    n_queries: int = 200, mix=(0.1, 0.3, 0.6)) -> SyntheticData:
    """Gaussian mixture with a skewed range-query workload.

    Cluster centers are standard normal and points scatter around them with
    standard deviation ``spread``. ``mix`` gives the fractions of queries that
    are cluster centers (many results), jittered members (few results) and
    midpoints between two clusters (no results). Suggested squared radii
    ``sparse``/``medium``/``dense`` are the 1%/10%/70% quantiles of the
    member-to-own-center distance, so a center query captures roughly that
    share of its cluster.
    """
    if clusters < 1 or n < clusters:
        raise ValueError("need n >= clusters >= 1")
    if d < 1 or n_queries < 0 or spread < 0:
        raise ValueError("invalid dimension, query count or spread")
    mix = np.asarray(mix, dtype=np.float64)
    if mix.shape != (3,) or (mix < 0).any() or mix.sum() <= 0:
        raise ValueError("mix must be three non-negative fractions")
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((clusters, d))
    labels = np.concatenate([np.arange(clusters), rng.integers(0, clusters, n - clusters)])
    data = centers[labels] + spread * rng.standard_normal((n, d))

    sizes = np.floor(mix / mix.sum() * n_queries).astype(int)
    sizes[2] = n_queries - sizes[0] - sizes[1]
    q_center = centers[rng.integers(0, clusters, sizes[0])]
    members = rng.integers(0, n, sizes[1])
    q_member = data[members] + 0.25 * spread * rng.standard_normal((sizes[1], d))
    if clusters >= 2:
        a = rng.integers(0, clusters, sizes[2])
        b = (a + rng.integers(1, clusters, sizes[2])) % clusters
        q_far = 0.5 * (centers[a] + centers[b])
    else:
        direction = rng.standard_normal((sizes[2], d))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        q_far = centers[0] + 4.0 * math.sqrt(d) * direction
    queries = np.concatenate([q_center, q_member, q_far])[rng.permutation(n_queries)]

    points = PointSet(data.astype(np.float32))
    qset = PointSet(queries.astype(np.float32))
    own = ((points.data.astype(np.float64) - centers[labels]) ** 2).sum(axis=1)
    radii = {name: float(np.quantile(own, q)) for name, q in
             (("sparse", 0.01), ("medium", 0.1), ("dense", 0.7))}
    return SyntheticData(points, qset, radii)


@dataclass
class StepMetrics:
    """Early-stopping metric values observed right before visit ``step``.

    ``found`` marks queries whose beam already held an in-range candidate;
    ``reached`` is false when the search ended before that many visits.
    """

    d_visited: np.ndarray
    d_top1: np.ndarray
    d_top10: np.ndarray
    d_top10_over_d_start: np.ndarray
    found: np.ndarray
    reached: np.ndarray

    def values(self, metric) -> np.ndarray:
        return getattr(self, StopMetric.parse(metric).name.lower())


def metrics_at_step(Q, G: ProximityGraph, points: PointSet, r: float, step: int = 20,
                    b: int = 100, quantized=None) -> StepMetrics:
    """Probe each query's beam search at visit ``step`` and record the metrics."""
    Qf = Q.as_queries() if isinstance(Q, PointSet) else np.atleast_2d(np.asarray(Q, dtype=np.float64))
    rows, lo, step_sz = search_arrays(points, quantized)
    kind = int(points.metric)
    start = np.asarray(G.start, dtype=np.int64)
    nq = len(Qf)
    out = {k: np.full(nq, np.nan) for k in ("d_visited", "d_top1", "d_top10", "d_top10_over_d_start")}
    found = np.zeros(nq, dtype=bool)
    reached = np.zeros(nq, dtype=bool)
    for i, q in enumerate(np.ascontiguousarray(Qf)):
        # r=-inf and esr=-inf make the predicate fire exactly at visit `step`
        beam_ids, beam_d, vis_ids, _, _, stopped = beam_search_kernel(
            q, rows, kind, lo, step_sz, G.neighbors, G.degrees, start, np.full(start.size, np.nan),
            b, int(StopMetric.D_VISITED), -np.inf, step, -np.inf)
        reached[i] = stopped
        if not stopped:
            continue
        unvisited = ~np.isin(beam_ids, vis_ids)
        d_start = point_dist(q, rows, start[0], kind, lo, step_sz)
        top10 = beam_d[9] if beam_d.size >= 10 else np.inf
        out["d_visited"][i] = beam_d[unvisited][0]
        out["d_top1"][i] = beam_d[0]
        out["d_top10"][i] = top10
        out["d_top10_over_d_start"][i] = top10 / d_start if d_start != 0 else np.inf
        found[i] = beam_d[0] <= r
    return StepMetrics(found=found, reached=reached, **out)


def calibrate_esr(values, has_results, found=None) -> float:
    """Smallest threshold that cuts off no result-bearing query at the probed step.

    Only queries without an in-range candidate yet (``~found``) can be stopped,
    so only those constrain the threshold. Falls back to just below the
    smallest zero-result value when no result-bearing query is eligible.
    """
    values = np.asarray(values, dtype=np.float64)
    has_results = np.asarray(has_results, dtype=bool)
    eligible = np.isfinite(values) if found is None else np.isfinite(values) & ~np.asarray(found, dtype=bool)
    at_risk = values[eligible & has_results]
    if at_risk.size:
        return float(at_risk.max())
    zero = values[eligible & ~has_results]
    if zero.size == 0:
        return math.inf
    return float(np.nextafter(zero.min(), -np.inf))
