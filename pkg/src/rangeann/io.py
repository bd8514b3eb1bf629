"""Little-endian binary formats for points, range ground truth and graphs.

Points (``.fbin``/``.u8bin``/``.i8bin``)::

    uint32 n, uint32 d, n*d elements row-major

Range ground truth::

    int32 nq, int32 total, int32 counts[nq], int32 ids[total], float32 dists[total]

Graph (``RGG1``)::

    b"RGG1", uint32 n, uint32 R, uint32 n_start, uint32 start[n_start],
    then per node: uint32 degree, uint32 ids[degree]
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .core import DistanceKind, PointSet
from .evaluation import RangeGroundTruth
from .graph import ProximityGraph

EXTENSIONS = {
    ".fbin": np.dtype("<f4"),
    ".u8bin": np.dtype("u1"),
    ".i8bin": np.dtype("i1"),
}
GRAPH_MAGIC = b"RGG1"


class FormatError(ValueError):
    pass


def _dtype_for(path) -> np.dtype:
    ext = Path(path).suffix.lower()
    try:
        return EXTENSIONS[ext]
    except KeyError:
        raise FormatError(f"unknown point file extension {ext!r} (expected one of {sorted(EXTENSIONS)})") from None


def read_points(path, metric=DistanceKind.SQEUCLIDEAN) -> PointSet:
    dtype = _dtype_for(path)
    size = os.path.getsize(path)
    if size < 8:
        raise FormatError(f"{path}: truncated header ({size} bytes)")
    with open(path, "rb") as f:
        n, d = struct.unpack("<II", f.read(8))
        expected = 8 + n * d * dtype.itemsize
        if size != expected:
            raise FormatError(f"{path}: header says {n}x{d} ({expected} bytes) but file has {size} bytes")
        data = np.fromfile(f, dtype=dtype, count=n * d).reshape(n, d)
    return PointSet(data.astype(dtype.newbyteorder("=")), metric)


def write_points(points: PointSet, path) -> None:
    dtype = _dtype_for(path)
    if points.data.dtype != dtype.newbyteorder("="):
        raise FormatError(f"{path}: extension implies {dtype}, points are {points.data.dtype}")
    with open(path, "wb") as f:
        f.write(struct.pack("<II", points.n, points.d))
        f.write(np.ascontiguousarray(points.data, dtype=dtype).tobytes())


def read_gt(path, radius: float = float("nan")) -> RangeGroundTruth:
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise FormatError(f"{path}: truncated header")
    nq, total = struct.unpack_from("<ii", raw)
    if nq < 0 or total < 0:
        raise FormatError(f"{path}: negative query count or total")
    expected = 8 + 4 * nq + 8 * total
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    counts = np.frombuffer(raw, dtype="<i4", count=nq, offset=8).astype(np.int64)
    if (counts < 0).any():
        raise FormatError(f"{path}: negative result count")
    if counts.sum() != total:
        raise FormatError(f"{path}: counts sum to {counts.sum()}, header total is {total}")
    ids = np.frombuffer(raw, dtype="<i4", count=total, offset=8 + 4 * nq).astype(np.int64)
    dists = np.frombuffer(raw, dtype="<f4", count=total, offset=8 + 4 * nq + 4 * total).astype(np.float32)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    return RangeGroundTruth(
        [ids[offsets[i]:offsets[i + 1]] for i in range(nq)],
        [dists[offsets[i]:offsets[i + 1]] for i in range(nq)],
        radius,
    )


def write_gt(gt, path) -> None:
    """Write a :class:`RangeGroundTruth` (or any per-query ids/distances result)."""
    counts = np.array([len(x) for x in gt.ids], dtype="<i4")
    total = int(counts.sum())
    ids = np.concatenate([np.asarray(x) for x in gt.ids]) if len(gt.ids) else np.empty(0)
    dists = np.concatenate([np.asarray(x) for x in gt.distances]) if len(gt.ids) else np.empty(0)
    with open(path, "wb") as f:
        f.write(struct.pack("<ii", len(counts), total))
        f.write(counts.tobytes())
        f.write(ids.astype("<i4").tobytes())
        f.write(dists.astype("<f4").tobytes())


def save_graph(G: ProximityGraph, path) -> None:
    start = np.asarray(G.start, dtype="<u4")
    with open(path, "wb") as f:
        f.write(GRAPH_MAGIC)
        f.write(struct.pack("<III", G.n, G.R, start.size))
        f.write(start.tobytes())
        for i in range(G.n):
            row = G.adjacency(i).astype("<u4")
            f.write(struct.pack("<I", row.size))
            f.write(row.tobytes())


def load_graph(path) -> ProximityGraph:
    raw = Path(path).read_bytes()
    if raw[:4] != GRAPH_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}")
    if len(raw) < 16:
        raise FormatError(f"{path}: truncated header")
    n, R, ns = struct.unpack_from("<III", raw, 4)
    off = 16
    start = np.frombuffer(raw, dtype="<u4", count=ns, offset=off).astype(np.int32)
    off += 4 * ns
    nbrs = np.zeros((n, R), dtype=np.int32)
    degs = np.zeros(n, dtype=np.int32)
    for i in range(n):
        if off + 4 > len(raw):
            raise FormatError(f"{path}: truncated at node {i}")
        (deg,) = struct.unpack_from("<I", raw, off)
        off += 4
        if deg > R:
            raise FormatError(f"{path}: node {i} has degree {deg} > R={R}")
        if off + 4 * deg > len(raw):
            raise FormatError(f"{path}: truncated at node {i}")
        nbrs[i, :deg] = np.frombuffer(raw, dtype="<u4", count=deg, offset=off)
        degs[i] = deg
        off += 4 * deg
    if off != len(raw):
        raise FormatError(f"{path}: {len(raw) - off} trailing bytes")
    used = nbrs[np.arange(R)[None, :] < degs[:, None]]
    if (start >= n).any() or (used >= n).any():
        raise FormatError(f"{path}: id out of range")
    return ProximityGraph(nbrs, degs, start)
