"""Figures for benchmark sweeps and dataset characterization.

Every function writes one image file and returns its path; nothing is shown
interactively.
"""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .datatools import CaptureCurve, FrequencyTable, StepMetrics  # noqa: E402
from .evaluation import BenchmarkRecord, pareto_frontier  # noqa: E402

STYLE = {
    "baseline": dict(color="tab:gray", linestyle="-", marker="o"),
    "greedy": dict(color="tab:blue", linestyle=":", marker="s"),
    "doubling": dict(color="tab:orange", linestyle="--", marker="^"),
}
GROUP_COLORS = ("tab:red", "tab:green", "tab:blue")


def _finish(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_qps_vs_ap(records: list[BenchmarkRecord], path, title: str = "") -> Path:
    """Pareto frontier of QPS against average precision per algorithm variant."""
    groups = defaultdict(list)
    for rec in records:
        groups[(rec.strategy, rec.early_stop)].append(rec)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for (strategy, es), recs in sorted(groups.items()):
        front = pareto_frontier(recs)
        style = dict(STYLE.get(strategy, {}))
        if es:
            style["markerfacecolor"] = "none"
        ax.plot([r.ap for r in front], [r.qps for r in front],
                label=f"{strategy}{' + early stop' if es else ''}", **style)
    ax.set_yscale("log")
    ax.set_xlabel("average precision")
    ax.set_ylabel("queries per second")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize="small")
    return _finish(fig, path)


def plot_capture_curves(curves: dict[str, CaptureCurve], path, normalize: bool = True) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for name, curve in curves.items():
        x = curve.normalized_radii() if normalize else curve.radii
        ax.plot(x, 100.0 * curve.fraction, label=name)
    ax.set_xlabel("normalized radius" if normalize else "radius")
    ax.set_ylabel("percent captured")
    ax.set_yscale("symlog", linthresh=1e-4)
    ax.grid(True, alpha=0.3)
    if len(curves) > 1:
        ax.legend(fontsize="small")
    return _finish(fig, path)


def plot_frequency(table: FrequencyTable, path, title: str = "") -> Path:
    labels, values = zip(*table.rows())
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(range(len(values)), values, color="tab:blue")
    ax.set_xticks(range(len(values)), labels)
    ax.set_yscale("symlog", linthresh=1)
    ax.set_xlabel("results per query")
    ax.set_ylabel("queries")
    if title:
        ax.set_title(title)
    for i, v in enumerate(values):
        ax.annotate(str(v), (i, v), ha="center", va="bottom", fontsize="small")
    return _finish(fig, path)


def plot_step_histograms(metrics: StepMetrics, sizes, path, exclude_found: bool = False,
                         bins: int = 40) -> Path:
    """Histograms of each early-stopping metric, split by true result count."""
    sizes = np.asarray(sizes)
    groups = (("0 results", sizes == 0), ("1-2 results", (sizes >= 1) & (sizes <= 2)),
              ("3+ results", sizes >= 3))
    keep = metrics.reached & (~metrics.found if exclude_found else True)
    names = ("d_visited", "d_top1", "d_top10", "d_top10_over_d_start")
    fig, axes = plt.subplots(1, len(names), figsize=(4 * len(names), 3.5))
    for ax, name in zip(axes, names):
        values = metrics.values(name)
        finite = keep & np.isfinite(values)
        if finite.any():
            edges = np.histogram_bin_edges(values[finite], bins=bins)
            for (label, mask), color in zip(groups, GROUP_COLORS):
                sel = finite & mask
                if sel.any():
                    ax.hist(values[sel], bins=edges, alpha=0.6, color=color, label=label)
        ax.set_title(name.replace("_over_", " / "))
        ax.set_yscale("log")
    axes[0].legend(fontsize="small")
    return _finish(fig, path)
