"""Range retrieval on graph-based approximate nearest neighbor indices."""

import os

import numba

# prefer OpenMP so an outdated TBB install is not probed (and warned about) first
if "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ:
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

from .core import DistanceKind, PointSet, QuantizedPointSet, distance, quantize, quantized_distance, rerank
from .datatools import (
    CaptureCurve,
    FrequencyTable,
    StepMetrics,
    calibrate_esr,
    capture_radii,
    frequency_distribution,
    metrics_at_step,
    percent_captured,
    synth_clustered,
)
from .early_stop import EarlyStopConfig, StopMetric, early_stop_example
from .evaluation import (
    BenchmarkRecord,
    InvalidResultError,
    RangeGroundTruth,
    average_precision,
    brute_force_range,
    pareto_frontier,
    run_benchmark,
)
from .graph import BuildParams, ProximityGraph, beam_search, build_index, medoid, robust_prune
from .range_search import (
    PRESETS,
    QueryResult,
    RangeParams,
    RangeResult,
    Strategy,
    batch_range_search,
    doubling_search,
    greedy_search,
    range_query,
)

__version__ = "0.1.0"
