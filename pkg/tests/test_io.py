import numpy as np
import pytest

from rangeann import PointSet, ProximityGraph, RangeGroundTruth, brute_force_range, synth_clustered
from rangeann import io
from rangeann.io import FormatError


def random_points(rng, dtype):
    n, d = int(rng.integers(0, 20)), int(rng.integers(1, 9))
    if dtype == np.float32:
        data = rng.standard_normal((n, d)).astype(np.float32)
    else:
        info = np.iinfo(dtype)
        data = rng.integers(info.min, info.max + 1, (n, d)).astype(dtype)
    return PointSet(data)


def random_gt(rng):
    nq = int(rng.integers(0, 8))
    sizes = rng.integers(0, 6, nq)
    return RangeGroundTruth([rng.integers(0, 1000, s) for s in sizes],
                            [rng.random(s).astype(np.float32) for s in sizes])


def random_graph(rng):
    n = int(rng.integers(1, 30))
    R = int(rng.integers(2, 8))
    lists = [rng.choice(n, min(n, int(rng.integers(0, R + 1))), replace=False).tolist() for _ in range(n)]
    return ProximityGraph.from_lists(lists, R, rng.choice(n, int(rng.integers(1, 3))))


def test_point_header_bytes(tmp_path):
    path = tmp_path / "x.fbin"
    io.write_points(PointSet(np.zeros((2, 3), np.float32)), path)
    raw = path.read_bytes()
    assert raw[:8] == bytes([2, 0, 0, 0, 3, 0, 0, 0]) and len(raw) == 32


def test_point_round_trips(tmp_path):
    rng = np.random.default_rng(0)
    for k in range(100):
        ext, dtype = [(".fbin", np.float32), (".u8bin", np.uint8), (".i8bin", np.int8)][k % 3]
        pts = random_points(rng, dtype)
        path = tmp_path / f"p{k}{ext}"
        io.write_points(pts, path)
        back = io.read_points(path)
        assert back.data.dtype == dtype and back.data.tobytes() == pts.data.tobytes()
        path2 = tmp_path / f"q{k}{ext}"
        io.write_points(back, path2)
        assert path.read_bytes() == path2.read_bytes()


def test_point_errors(tmp_path):
    bad = tmp_path / "x.fbin"
    bad.write_bytes(bytes([2, 0, 0, 0, 3, 0, 0, 0]) + b"\0" * 20)
    with pytest.raises(FormatError):
        io.read_points(bad)
    short = tmp_path / "y.u8bin"
    short.write_bytes(b"\1\0")
    with pytest.raises(FormatError):
        io.read_points(short)
    with pytest.raises(FormatError):
        io.read_points(tmp_path / "z.bin")
    with pytest.raises(FormatError):
        io.write_points(PointSet(np.zeros((1, 1), np.float32)), tmp_path / "w.u8bin")


def test_gt_round_trips(tmp_path):
    rng = np.random.default_rng(1)
    for k in range(100):
        gt = random_gt(rng)
        path = tmp_path / f"g{k}.bin"
        io.write_gt(gt, path)
        assert io.read_gt(path) == gt


def test_gt_single_empty_query(tmp_path):
    path = tmp_path / "gt.bin"
    io.write_gt(RangeGroundTruth([np.array([], np.int64)], [np.array([], np.float32)]), path)
    assert path.read_bytes() == bytes([1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0])


def test_gt_byte_stable(tmp_path):
    syn = synth_clustered(500, 4, 5, seed=3, n_queries=30)
    gt = brute_force_range(syn.points, syn.queries, syn.radii["dense"])
    io.write_gt(gt, tmp_path / "a.bin")
    io.write_gt(io.read_gt(tmp_path / "a.bin"), tmp_path / "b.bin")
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()


def test_gt_errors(tmp_path):
    import struct
    path = tmp_path / "bad.bin"
    path.write_bytes(struct.pack("<iii", 1, 2, 1) + struct.pack("<ii", 0, 0) + struct.pack("<ff", 0, 0))
    with pytest.raises(FormatError):
        io.read_gt(path)
    path.write_bytes(struct.pack("<iii", 1, 0, -1))
    with pytest.raises(FormatError):
        io.read_gt(path)
    path.write_bytes(struct.pack("<ii", 1, 0))
    with pytest.raises(FormatError):
        io.read_gt(path)


def test_graph_round_trips(tmp_path):
    rng = np.random.default_rng(2)
    single = ProximityGraph.from_lists([[]], 2, [0])
    graphs = [single] + [random_graph(rng) for _ in range(99)]
    for k, G in enumerate(graphs):
        path = tmp_path / f"g{k}.rgg"
        io.save_graph(G, path)
        assert io.load_graph(path) == G


def test_graph_errors(tmp_path):
    import struct
    path = tmp_path / "g.rgg"
    io.save_graph(ProximityGraph.from_lists([[1], [0]], 2, [0]), path)
    raw = path.read_bytes()
    (tmp_path / "m.rgg").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(FormatError):
        io.load_graph(tmp_path / "m.rgg")
    # node 0 claims degree 3 > R=2
    head = raw[:4] + struct.pack("<III", 2, 2, 1) + struct.pack("<I", 0)
    (tmp_path / "d.rgg").write_bytes(head + struct.pack("<IIII", 3, 1, 1, 1))
    with pytest.raises(FormatError):
        io.load_graph(tmp_path / "d.rgg")
    (tmp_path / "t.rgg").write_bytes(raw[:-2])
    with pytest.raises(FormatError):
        io.load_graph(tmp_path / "t.rgg")
    (tmp_path / "x.rgg").write_bytes(raw + b"\0")
    with pytest.raises(FormatError):
        io.load_graph(tmp_path / "x.rgg")
