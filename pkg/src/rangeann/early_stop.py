"""Early-stopping predicates for zero-result range queries.

A beam search evaluates the predicate right before each visit. It fires only
when nothing in the beam is within the query radius, at least ``vl`` visits
have completed, and the chosen metric exceeds the early-stopping radius.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numba
import numpy as np


class StopMetric(enum.IntEnum):
    NEVER = 0
    D_VISITED = 1
    D_TOP1 = 2
    D_TOP10 = 3
    D_TOP10_OVER_D_START = 4
    # min distance over visited points that fell out of the beam
    D_VISITED_OUTSIDE_BEAM = 5

    @classmethod
    def parse(cls, value) -> "StopMetric":
        if isinstance(value, StopMetric):
            return value
        if isinstance(value, (int, np.integer)):
            return cls(int(value))
        key = str(value).strip().lower().replace("-", "_").replace("/", "_over_")
        for m in cls:
            if m.name.lower() == key:
                return m
        raise ValueError(f"unknown early-stop metric {value!r}")


@dataclass(frozen=True)
class EarlyStopConfig:
    enabled: bool = False
    vl: int = 20
    esr: float = math.inf
    metric: StopMetric = StopMetric.D_VISITED

    def __post_init__(self):
        object.__setattr__(self, "metric", StopMetric.parse(self.metric))
        if self.vl < 0:
            raise ValueError("visit limit must be non-negative")
        if self.metric == StopMetric.D_TOP10_OVER_D_START and self.enabled and not self.esr > 0:
            raise ValueError("ratio threshold must be positive")

    @property
    def kernel_metric(self) -> int:
        return int(self.metric) if self.enabled else int(StopMetric.NEVER)


NEVER = 0
D_VISITED = 1
D_TOP1 = 2
D_TOP10 = 3
D_TOP10_OVER_D_START = 4
D_VISITED_OUTSIDE_BEAM = 5

IN_BEAM = 2


@numba.njit(cache=True, nogil=True)
def should_stop(metric, beam_d, m, pos, n_visited, r, vl, esr, d_start,
                vis_ids, vis_d, state):
    """Kernel form of the predicate; ``beam_d[:m]`` is sorted, ``pos`` is p*."""
    if metric == NEVER:
        return False
    if m > 0 and beam_d[0] <= r:
        return False
    if n_visited < vl:
        return False
    if metric == D_VISITED:
        value = beam_d[pos]
    elif metric == D_TOP1:
        value = beam_d[0]
    elif metric == D_TOP10 or metric == D_TOP10_OVER_D_START:
        # a beam shorter than 10 never triggers these metrics
        if m < 10:
            return False
        value = beam_d[9]
        if metric == D_TOP10_OVER_D_START:
            value = value / d_start if d_start != 0.0 else np.inf
    elif metric == D_VISITED_OUTSIDE_BEAM:
        value = np.inf
        found = False
        for k in range(n_visited):
            if (state[vis_ids[k]] & IN_BEAM) == 0 and vis_d[k] < value:
                value = vis_d[k]
                found = True
        if not found:
            return False
    else:
        return False
    return value > esr


def early_stop_example(beam, visited, v: int, cfg: EarlyStopConfig, r: float,
                       d_start: float = math.nan) -> bool:
    """Reference predicate over explicit ``(ids, distances)`` beam/visited pairs.

    ``beam`` need not be sorted. The candidate p* is the minimum-distance beam
    element not in ``visited``.
    """
    if not cfg.enabled or cfg.metric == StopMetric.NEVER:
        return False
    b_ids, b_d = (np.asarray(a) for a in beam)
    v_ids, v_d = (np.asarray(a) for a in visited)
    if b_d.size and b_d.min() <= r:
        return False
    if v < cfg.vl:
        return False
    order = np.lexsort((b_ids, b_d))
    b_ids, b_d = b_ids[order], b_d[order]
    metric = cfg.metric
    if metric == StopMetric.D_VISITED:
        unvisited = ~np.isin(b_ids, v_ids)
        if not unvisited.any():
            return False
        value = b_d[unvisited][0]
    elif metric == StopMetric.D_TOP1:
        value = b_d[0] if b_d.size else math.inf
    elif metric in (StopMetric.D_TOP10, StopMetric.D_TOP10_OVER_D_START):
        if b_d.size < 10:
            return False
        value = b_d[9]
        if metric == StopMetric.D_TOP10_OVER_D_START:
            value = value / d_start if d_start != 0 else math.inf
    else:
        outside = ~np.isin(v_ids, b_ids)
        if not outside.any():
            return False
        value = v_d[outside].min()
    return bool(value > cfg.esr)
