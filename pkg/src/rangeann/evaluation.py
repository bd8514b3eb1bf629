"""Ground truth, average precision and QPS sweeps."""

from __future__ import annotations

import csv
import os
import time
from dataclasses import dataclass, field

import numba
import numpy as np
from numba import prange

from .core import PointSet, QuantizedPointSet, dist_kernel, sort_by_distance
from .graph import ProximityGraph
from .range_search import RangeParams, RangeResult, batch_range_search

BENCHMARK_FIELDS = ("strategy", "b", "early_stop", "threads", "qps", "ap", "dist_comps")


@dataclass
class RangeGroundTruth:
    """Exact range results per query, each sorted by (distance, id).

    Distances are stored as float32, the interchange precision of the
    ground-truth file format.
    """

    ids: list[np.ndarray]
    distances: list[np.ndarray]
    radius: float = float("nan")

    def __post_init__(self):
        self.ids = [np.asarray(x, dtype=np.int64) for x in self.ids]
        self.distances = [np.asarray(x, dtype=np.float32) for x in self.distances]
        if len(self.ids) != len(self.distances):
            raise ValueError("ids and distances disagree on the query count")

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def nq(self) -> int:
        return len(self.ids)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(x) for x in self.ids], dtype=np.int64)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RangeGroundTruth) or len(self) != len(other):
            return False
        return all(np.array_equal(a, b) for a, b in zip(self.ids, other.ids)) and all(
            np.array_equal(a, b) for a, b in zip(self.distances, other.distances))


@numba.njit(cache=True, parallel=True)
def _count_in_range(Q, data, kind, r):
    counts = np.zeros(Q.shape[0], np.int64)
    for i in prange(Q.shape[0]):
        c = 0
        for j in range(data.shape[0]):
            if dist_kernel(Q[i], data[j], kind) <= r:
                c += 1
        counts[i] = c
    return counts


@numba.njit(cache=True, parallel=True)
def _fill_in_range(Q, data, kind, r, offsets, ids, ds):
    for i in prange(Q.shape[0]):
        t = offsets[i]
        for j in range(data.shape[0]):
            dj = dist_kernel(Q[i], data[j], kind)
            if dj <= r:
                ids[t] = j
                ds[t] = dj
                t += 1
        lo = offsets[i]
        hi = offsets[i + 1]
        order = sort_by_distance(ids[lo:hi], ds[lo:hi])
        ids[lo:hi] = ids[lo:hi][order]
        ds[lo:hi] = ds[lo:hi][order]


def _query_matrix(Q, d: int) -> np.ndarray:
    Qf = Q.as_queries() if isinstance(Q, PointSet) else np.asarray(Q, dtype=np.float64)
    Qf = np.ascontiguousarray(np.atleast_2d(Qf))
    if Qf.shape[0] and Qf.shape[1] != d:
        raise ValueError(f"dimension mismatch: queries have d={Qf.shape[1]}, points have d={d}")
    return Qf


def brute_force_range(points: PointSet, Q, r: float) -> RangeGroundTruth:
    """Exhaustive range search, exact under the same arithmetic as the index."""
    Qf = _query_matrix(Q, points.d)
    kind = int(points.metric)
    counts = _count_in_range(Qf, points.data, kind, float(r))
    offsets = np.zeros(len(Qf) + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    ids = np.empty(offsets[-1], dtype=np.int64)
    ds = np.empty(offsets[-1], dtype=np.float64)
    _fill_in_range(Qf, points.data, kind, float(r), offsets, ids, ds)
    return RangeGroundTruth(
        [ids[offsets[i]:offsets[i + 1]] for i in range(len(Qf))],
        [ds[offsets[i]:offsets[i + 1]] for i in range(len(Qf))],
        float(r),
    )


class InvalidResultError(ValueError):
    """A reported id is not a true range neighbor of its query."""


def average_precision(gt: RangeGroundTruth, results) -> float:
    """Fraction of all true range neighbors that were reported.

    ``results`` is anything with a per-query ``ids`` sequence. Reporting a point
    outside the radius is an error, not a penalty.
    """
    if len(gt.ids) != len(results.ids):
        raise ValueError(f"query count mismatch: {len(gt.ids)} != {len(results.ids)}")
    found = 0
    total = 0
    for qi, (truth, got) in enumerate(zip(gt.ids, results.ids)):
        got = np.unique(np.asarray(got, dtype=np.int64))
        hit = np.isin(got, truth, assume_unique=True)
        if not hit.all():
            raise InvalidResultError(
                f"query {qi}: ids {got[~hit][:5].tolist()} are not within the radius")
        found += got.size
        total += len(truth)
    return 1.0 if total == 0 else found / total


@dataclass
class BenchmarkRecord:
    strategy: str
    b: int
    early_stop: bool
    threads: int
    wall_time: float
    qps: float
    ap: float
    dist_comps: int
    results: RangeResult | None = field(default=None, repr=False, compare=False)

    def row(self) -> dict:
        return {
            "strategy": self.strategy,
            "b": self.b,
            "early_stop": int(self.early_stop),
            "threads": self.threads,
            "qps": f"{self.qps:.6g}",
            "ap": f"{self.ap:.6f}",
            "dist_comps": self.dist_comps,
        }


def run_benchmark(Q, G: ProximityGraph, points: PointSet, gt: RangeGroundTruth,
                  sweep: list[RangeParams], threads: int | None = None,
                  quantized: QuantizedPointSet | None = None,
                  keep_results: bool = False, warmup: bool = True,
                  repeats: int = 1) -> list[BenchmarkRecord]:
    """One untimed warm-up pass, then the fastest of ``repeats`` timed passes per sweep point."""
    Qf = _query_matrix(Q, points.d)
    threads = threads or os.cpu_count() or 1
    records = []
    for params in sweep:
        if not np.isnan(gt.radius) and not np.isclose(gt.radius, params.r):
            raise ValueError(f"ground truth radius {gt.radius} != search radius {params.r}")
        if warmup:
            batch_range_search(Qf, G, points, params, quantized, threads)
        wall = np.inf
        for _ in range(max(1, repeats)):
            t0 = time.perf_counter()
            res = batch_range_search(Qf, G, points, params, quantized, threads)
            wall = min(wall, time.perf_counter() - t0)
        records.append(BenchmarkRecord(
            strategy=str(params.strategy),
            b=params.b,
            early_stop=params.early_stop.enabled,
            threads=threads,
            wall_time=wall,
            qps=len(Qf) / wall if wall > 0 else float("inf"),
            ap=average_precision(gt, res),
            dist_comps=res.totals()["dist_comps"],
            results=res if keep_results else None,
        ))
    return records


def pareto_frontier(records: list[BenchmarkRecord]) -> list[BenchmarkRecord]:
    """Records not dominated in (AP, QPS), sorted by AP ascending."""
    ordered = sorted(records, key=lambda rec: (-rec.ap, -rec.qps))
    frontier = []
    best_qps = -np.inf
    for rec in ordered:
        if rec.qps > best_qps:
            frontier.append(rec)
            best_qps = rec.qps
        # an exact tie with a kept record is not dominated either
        elif frontier and rec.qps == frontier[-1].qps and rec.ap == frontier[-1].ap:
            frontier.append(rec)
    return sorted(frontier, key=lambda rec: (rec.ap, -rec.qps))


def write_benchmark_csv(records: list[BenchmarkRecord], path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=BENCHMARK_FIELDS)
        writer.writeheader()
        for rec in records:
            writer.writerow(rec.row())


def read_benchmark_csv(path) -> list[BenchmarkRecord]:
    records = []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            qps = float(row["qps"])
            records.append(BenchmarkRecord(
                strategy=row["strategy"],
                b=int(row["b"]),
                early_stop=bool(int(row["early_stop"])),
                threads=int(row.get("threads") or 1),
                wall_time=float("nan"),
                qps=qps,
                ap=float(row["ap"]),
                dist_comps=int(row["dist_comps"]),
            ))
    return records
