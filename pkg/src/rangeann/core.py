"""Vector storage, distance functions and 8-bit scalar quantization.

All distances accumulate in float64. For integer element types every term is
an exact integer and the sum stays below 2**53 for d <= 2**16, so uint8/int8
distances are exact.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numba
import numpy as np

SUPPORTED_DTYPES = (np.dtype(np.float32), np.dtype(np.uint8), np.dtype(np.int8))


class DistanceKind(enum.IntEnum):
    SQEUCLIDEAN = 0
    NEG_INNER_PRODUCT = 1

    @classmethod
    def parse(cls, value: "str | int | DistanceKind") -> "DistanceKind":
        if isinstance(value, DistanceKind):
            return value
        if isinstance(value, (int, np.integer)):
            return cls(int(value))
        key = str(value).strip().lower().replace("-", "_")
        aliases = {
            "l2": cls.SQEUCLIDEAN,
            "sqeuclidean": cls.SQEUCLIDEAN,
            "euclidean": cls.SQEUCLIDEAN,
            "ip": cls.NEG_INNER_PRODUCT,
            "mips": cls.NEG_INNER_PRODUCT,
            "neg_inner_product": cls.NEG_INNER_PRODUCT,
            "inner_product": cls.NEG_INNER_PRODUCT,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown distance kind {value!r}") from None


@dataclass(frozen=True, eq=False)
class PointSet:
    """Dense ``n x d`` matrix of vectors plus the distance used to compare them."""

    data: np.ndarray
    metric: DistanceKind = DistanceKind.SQEUCLIDEAN

    def __post_init__(self):
        data = np.ascontiguousarray(self.data)
        if data.ndim != 2:
            raise ValueError(f"point data must be 2-D, got shape {data.shape}")
        if data.shape[1] < 1:
            raise ValueError("dimension must be at least 1")
        if data.dtype not in SUPPORTED_DTYPES:
            raise TypeError(f"unsupported element type {data.dtype}")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "metric", DistanceKind.parse(self.metric))

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    @property
    def elem(self) -> str:
        return self.data.dtype.name

    def __len__(self) -> int:
        return self.n

    def check_id(self, i: int) -> None:
        if not 0 <= i < self.n:
            raise IndexError(f"point id {i} out of range [0, {self.n})")

    def as_queries(self) -> np.ndarray:
        """Rows as float64, the representation every kernel takes for queries."""
        return self.data.astype(np.float64)


@dataclass(frozen=True, eq=False)
class QuantizedPointSet:
    """Per-dimension min/max 8-bit codes of a float32 :class:`PointSet`."""

    codes: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    source: PointSet = field(repr=False)

    @property
    def step(self) -> np.ndarray:
        return (self.hi - self.lo) / 255.0

    @property
    def n(self) -> int:
        return self.codes.shape[0]

    @property
    def d(self) -> int:
        return self.codes.shape[1]

    def dequantize(self) -> np.ndarray:
        return self.lo + self.codes.astype(np.float64) * self.step


# numba kernels ---------------------------------------------------------------

SQEUCLIDEAN = 0
NEG_INNER_PRODUCT = 1


@numba.njit(cache=True, nogil=True)
def dist_kernel(a, b, kind):
    acc = 0.0
    if kind == SQEUCLIDEAN:
        for j in range(a.shape[0]):
            t = np.float64(a[j]) - np.float64(b[j])
            acc += t * t
        return acc
    for j in range(a.shape[0]):
        acc += np.float64(a[j]) * np.float64(b[j])
    return -acc


@numba.njit(cache=True, nogil=True)
def quantized_dist_kernel(q, code, lo, step, kind):
    acc = 0.0
    if kind == SQEUCLIDEAN:
        for j in range(q.shape[0]):
            t = q[j] - (lo[j] + np.float64(code[j]) * step[j])
            acc += t * t
        return acc
    for j in range(q.shape[0]):
        acc += q[j] * (lo[j] + np.float64(code[j]) * step[j])
    return -acc


@numba.njit(cache=True, nogil=True)
def point_dist(q, data, i, kind, lo, step):
    """Distance from ``q`` to row ``i``; an empty ``lo`` means exact rows."""
    if lo.shape[0] == 0:
        return dist_kernel(q, data[i], kind)
    return quantized_dist_kernel(q, data[i], lo, step, kind)


@numba.njit(cache=True, nogil=True)
def sort_by_distance(ids, dists):
    """Order of ``(dist, id)`` ascending."""
    by_id = np.argsort(ids, kind="mergesort")
    by_dist = np.argsort(dists[by_id], kind="mergesort")
    return by_id[by_dist]


@numba.njit(cache=True, nogil=True)
def rerank_kernel(q, data, kind, cand, r):
    n = data.shape[0]
    seen = np.zeros(n, np.uint8)
    ids = np.empty(cand.shape[0], np.int64)
    ds = np.empty(cand.shape[0], np.float64)
    m = 0
    for k in range(cand.shape[0]):
        c = cand[k]
        if seen[c]:
            continue
        seen[c] = 1
        dc = dist_kernel(q, data[c], kind)
        if dc <= r:
            ids[m] = c
            ds[m] = dc
            m += 1
    order = sort_by_distance(ids[:m], ds[:m])
    return ids[:m][order], ds[:m][order]


# public API ------------------------------------------------------------------


def _vector(x) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(x, dtype=np.float64).reshape(-1))


def distance(a, b, kind=DistanceKind.SQEUCLIDEAN) -> float:
    """Squared Euclidean or negative inner product distance between two vectors.

    >>> distance([0, 0], [3, 4])
    25.0
    >>> distance([1, 2], [3, 4], "ip")
    -11.0
    """
    a, b = _vector(a), _vector(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} != {b.shape[0]}")
    return float(dist_kernel(a, b, int(DistanceKind.parse(kind))))


def quantize(points: PointSet) -> QuantizedPointSet:
    """Linear per-dimension 8-bit codes over the dataset's [min, max] range."""
    if points.data.dtype != np.float32:
        raise TypeError("only float32 point sets are quantized")
    if points.n == 0:
        raise ValueError("cannot quantize an empty point set")
    x = points.data.astype(np.float64)
    lo = x.min(axis=0)
    hi = x.max(axis=0)
    span = hi - lo
    scale = np.divide(255.0, span, out=np.zeros_like(span), where=span > 0)
    codes = np.clip(np.floor((x - lo) * scale + 0.5), 0, 255).astype(np.uint8)
    return QuantizedPointSet(codes=codes, lo=lo, hi=hi, source=points)


def quantized_distance(q, i: int, qp: QuantizedPointSet, kind=None) -> float:
    """Distance between ``q`` and the dequantized code of point ``i``."""
    kind = qp.source.metric if kind is None else DistanceKind.parse(kind)
    q = _vector(q)
    if q.shape[0] != qp.d:
        raise ValueError(f"dimension mismatch: {q.shape[0]} != {qp.d}")
    if not 0 <= i < qp.n:
        raise IndexError(f"point id {i} out of range [0, {qp.n})")
    return float(quantized_dist_kernel(q, qp.codes[i], qp.lo, qp.step, int(kind)))


def rerank(q, candidates, points: PointSet, r: float) -> np.ndarray:
    """Candidates whose exact distance to ``q`` is at most ``r``.

    Duplicates collapse; the result is sorted by (distance, id).
    """
    q = _vector(q)
    if q.shape[0] != points.d:
        raise ValueError(f"dimension mismatch: {q.shape[0]} != {points.d}")
    cand = np.asarray(candidates, dtype=np.int64).reshape(-1)
    if cand.size and (cand.min() < 0 or cand.max() >= points.n):
        raise IndexError("candidate id out of range")
    ids, _ = rerank_kernel(q, points.data, int(points.metric), cand, float(r))
    return ids
