"""Command-line interface: ``rangeann <subcommand> ...``.

Each subcommand writes machine-readable CSV (or binary) output to ``--out``
and a short human summary to stdout. ``--plot`` additionally renders a figure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time
from pathlib import Path


from . import io
from .core import DistanceKind, quantize
from .datatools import (
    calibrate_esr,
    capture_radii,
    frequency_distribution,
    metrics_at_step,
    percent_captured,
    synth_clustered,
)
from .early_stop import EarlyStopConfig, StopMetric
from .evaluation import (
    brute_force_range,
    pareto_frontier,
    read_benchmark_csv,
    run_benchmark,
    write_benchmark_csv,
)
from .graph import BuildParams, build_index
from .range_search import PRESETS, RangeParams, Strategy

log = logging.getLogger("rangeann")


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def _default_threads() -> int:
    return os.cpu_count() or 1


def cmd_build(args) -> int:
    points = io.read_points(args.data, args.metric)
    params = BuildParams(R=args.R, L=args.L, alpha=args.alpha, seed=args.seed, parallel=args.parallel)
    t0 = time.perf_counter()
    G = build_index(points, params)
    elapsed = time.perf_counter() - t0
    io.save_graph(G, args.out)
    print(f"built graph over {points.n} points in {elapsed:.1f}s: "
          f"R={params.R} L={params.L} alpha={params.alpha} mean degree {G.degrees.mean():.1f} "
          f"start={G.start.tolist()} -> {args.out}")
    return 0


def cmd_gt(args) -> int:
    points = io.read_points(args.data, args.metric)
    queries = io.read_points(args.queries, args.metric)
    t0 = time.perf_counter()
    gt = brute_force_range(points, queries, args.radius)
    io.write_gt(gt, args.out)
    sizes = gt.sizes
    print(f"ground truth for {gt.nq} queries at r={args.radius} in {time.perf_counter() - t0:.1f}s: "
          f"{int((sizes == 0).sum())} empty, {int(sizes.sum())} results, max {int(sizes.max(initial=0))}"
          f" -> {args.out}")
    return 0


def cmd_search(args) -> int:
    points = io.read_points(args.data, args.metric)
    queries = io.read_points(args.queries, args.metric)
    G = io.load_graph(args.graph)
    if args.gt:
        gt = io.read_gt(args.gt, args.radius)
    else:
        gt = brute_force_range(points, queries, args.radius)
    quantized = quantize(points) if args.quantize else None
    es = EarlyStopConfig(enabled=args.early_stop, vl=args.vl,
                         esr=args.esr if args.esr is not None else float("inf"), metric=args.es_metric)
    sweep = [RangeParams(r=args.radius, b=b, lam=args.lam, strategy=s, early_stop=es)
             for s in args.strategy for b in args.beams]
    records = run_benchmark(queries, G, points, gt, sweep, threads=args.threads,
                            quantized=quantized, keep_results=bool(args.dump_results),
                            repeats=args.repeats)
    write_benchmark_csv(records, args.out)
    front = pareto_frontier(records)
    pareto_out = args.pareto_out or str(Path(args.out).with_name(Path(args.out).stem + "_pareto.csv"))
    write_benchmark_csv(front, pareto_out)
    if args.dump_results:
        out_dir = Path(args.dump_results)
        out_dir.mkdir(parents=True, exist_ok=True)
        for rec in records:
            io.write_gt(rec.results, out_dir / f"{rec.strategy}_b{rec.b}{'_es' if rec.early_stop else ''}.bin")
    for rec in records:
        print(f"{rec.strategy:>9} b={rec.b:<6} es={int(rec.early_stop)} "
              f"qps={rec.qps:>10.1f} ap={rec.ap:.4f} dist_comps={rec.dist_comps}")
    print(f"{len(front)} of {len(records)} points on the Pareto frontier -> {pareto_out}")
    if args.plot:
        from .report import plot_qps_vs_ap
        print(f"figure -> {plot_qps_vs_ap(records, args.plot)}")
    return 0


def cmd_pareto(args) -> int:
    records = read_benchmark_csv(args.input)
    front = pareto_frontier(records)
    write_benchmark_csv(front, args.out)
    for rec in front:
        print(f"{rec.strategy:>9} b={rec.b:<6} es={int(rec.early_stop)} qps={rec.qps:.1f} ap={rec.ap:.4f}")
    if args.plot:
        from .report import plot_qps_vs_ap
        print(f"figure -> {plot_qps_vs_ap(records, args.plot)}")
    return 0


def cmd_analyze_radius(args) -> int:
    points = io.read_points(args.data, args.metric)
    queries = io.read_points(args.queries, args.metric)
    radii = args.radii or capture_radii(points, queries, args.num, args.sample, args.seed)
    curve = percent_captured(points, queries, radii, args.sample, args.seed)
    _write_rows(args.out, ("radius", "fraction"), curve.rows())
    for r, f in curve.rows():
        print(f"r={r:<14.6g} captured={100 * f:.6f}%")
    if args.plot:
        from .report import plot_capture_curves
        print(f"figure -> {plot_capture_curves({Path(args.data).stem: curve}, args.plot)}")
    return 0


def cmd_analyze_freq(args) -> int:
    if args.gt:
        gt = io.read_gt(args.gt)
    else:
        if not (args.data and args.queries and args.radius is not None):
            raise ValueError("need --gt, or --data, --queries and --radius")
        gt = brute_force_range(io.read_points(args.data, args.metric),
                               io.read_points(args.queries, args.metric), args.radius)
    table = frequency_distribution(gt)
    _write_rows(args.out, ("bucket", "count"), table.rows())
    print("  ".join(f"{label}:{count}" for label, count in table.rows()))
    if table.has_overflow:
        print(f"warning: {table.overflow} queries exceed {table.bounds[-1]} results")
    if args.plot:
        from .report import plot_frequency
        print(f"figure -> {plot_frequency(table, args.plot)}")
    return 0


def cmd_analyze_stop(args) -> int:
    points = io.read_points(args.data, args.metric)
    queries = io.read_points(args.queries, args.metric)
    G = io.load_graph(args.graph)
    gt = io.read_gt(args.gt) if args.gt else brute_force_range(points, queries, args.radius)
    quantized = quantize(points) if args.quantize else None
    m = metrics_at_step(queries, G, points, args.radius, args.step, args.beam, quantized)
    sizes = gt.sizes
    names = ("d_visited", "d_top1", "d_top10", "d_top10_over_d_start")
    rows = [(i, int(sizes[i]), int(m.found[i]), int(m.reached[i]), *(m.values(n)[i] for n in names))
            for i in range(len(sizes))]
    _write_rows(args.out, ("query", "results", "found", "reached", *names), rows)
    esr = calibrate_esr(m.values(args.es_metric), sizes > 0, m.found)
    print(f"calibrated {StopMetric.parse(args.es_metric).name.lower()} threshold at step {args.step}: {esr:.6g}")
    if args.plot:
        from .report import plot_step_histograms
        print(f"figure -> {plot_step_histograms(m, sizes, args.plot)}")
    return 0


def cmd_synth(args) -> int:
    data = synth_clustered(args.n, args.d, args.clusters, args.spread, args.seed,
                           args.num_queries, tuple(args.mix))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_points(data.points, out / "data.fbin")
    io.write_points(data.queries, out / "queries.fbin")
    _write_rows(out / "radii.csv", ("name", "radius"), sorted(data.radii.items(), key=lambda kv: kv[1]))
    print(f"wrote {data.points.n} points and {data.queries.n} queries (d={args.d}) to {out}")
    for name, r in data.radii.items():
        print(f"  {name:>6} radius {r:.6g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rangeann", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True, queries=False):
        if data:
            p.add_argument("--data", required=True, help="base vectors (.fbin/.u8bin/.i8bin)")
        if queries:
            p.add_argument("--queries", required=True)
        p.add_argument("--metric", type=DistanceKind.parse, default=DistanceKind.SQEUCLIDEAN,
                       help="l2 (squared Euclidean) or ip (negative inner product)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=_default_threads())

    p = sub.add_parser("build", help="build a Vamana graph")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("-R", type=int, default=64)
    p.add_argument("-L", type=int, default=128)
    p.add_argument("--alpha", type=float, default=1.15)
    p.add_argument("--parallel", action="store_true")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("gt", help="exact range ground truth")
    common(p, queries=True)
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gt)

    p = sub.add_parser("search", help="QPS / average-precision sweep over beam widths")
    common(p, queries=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--gt", help="range ground truth file (computed when omitted)")
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--strategy", type=lambda s: [Strategy.parse(x) for x in s.split(",")],
                   default=[Strategy.GREEDY], help="comma list of baseline,greedy,doubling")
    p.add_argument("--beams", type=_int_list, default=[10, 20, 40, 80, 160])
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--early-stop", action="store_true")
    p.add_argument("--vl", type=int, default=20)
    p.add_argument("--esr", type=float)
    p.add_argument("--es-metric", default="d_visited")
    p.add_argument("--quantize", action="store_true", help="search 8-bit codes, rerank exactly")
    p.add_argument("--repeats", type=int, default=1, help="timed passes per sweep point; the fastest counts")
    p.add_argument("--out", required=True)
    p.add_argument("--pareto-out")
    p.add_argument("--dump-results", metavar="DIR", help="write per-sweep results as range GT files")
    p.add_argument("--plot", metavar="PNG")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("analyze-radius", help="percent captured versus radius")
    common(p, queries=True)
    p.add_argument("--radii", type=_float_list)
    p.add_argument("--num", type=int, default=50)
    p.add_argument("--sample", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--plot", metavar="PNG")
    p.set_defaults(func=cmd_analyze_radius)

    p = sub.add_parser("analyze-freq", help="distribution of result-set sizes")
    common(p, data=False)
    p.add_argument("--gt")
    p.add_argument("--data")
    p.add_argument("--queries")
    p.add_argument("--radius", type=float)
    p.add_argument("--out", required=True)
    p.add_argument("--plot", metavar="PNG")
    p.set_defaults(func=cmd_analyze_freq)

    p = sub.add_parser("analyze-stop", help="early-stopping metrics at a fixed step")
    common(p, queries=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--gt")
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--step", type=int, default=20)
    p.add_argument("--beam", type=int, default=100)
    p.add_argument("--es-metric", default="d_visited")
    p.add_argument("--quantize", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--plot", metavar="PNG")
    p.set_defaults(func=cmd_analyze_stop)

    p = sub.add_parser("synth", help="synthetic clustered dataset")
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--d", type=int, default=32)
    p.add_argument("--clusters", type=int, default=50)
    p.add_argument("--spread", type=float, default=0.1)
    p.add_argument("--num-queries", type=int, default=200)
    p.add_argument("--mix", type=_float_list, default=[0.1, 0.3, 0.6])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pareto", help="Pareto frontier of a benchmark CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--plot", metavar="PNG")
    p.set_defaults(func=cmd_pareto)
    return parser


def _apply_preset(argv: list[str]) -> list[str]:
    # `--preset NAME` expands to that dataset's defaults; explicit flags win
    if "--preset" not in argv:
        return argv
    i = argv.index("--preset")
    if i + 1 >= len(argv) or argv[i + 1] not in PRESETS:
        raise SystemExit(f"rangeann: --preset must be one of {', '.join(PRESETS)}")
    preset = PRESETS[argv[i + 1]]
    rest = argv[:i] + argv[i + 2:]
    cmd = rest[0] if rest else ""
    extra = ["--metric", preset.metric]
    if cmd == "build":
        extra += ["-R", str(preset.build.R), "-L", str(preset.build.L), "--alpha", str(preset.build.alpha)]
    elif cmd in ("search", "gt", "analyze-stop", "analyze-freq"):
        extra += ["--radius", str(preset.radius)]
        if cmd == "search":
            extra += ["--esr", str(preset.esr)]
    elif cmd not in ("analyze-radius",):
        extra = []
    return rest[:1] + extra + rest[1:]


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(_apply_preset(argv))
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args) or 0
    except (OSError, ValueError, TypeError, IndexError) as exc:
        print(f"rangeann {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
