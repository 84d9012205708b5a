"""Trace post-processing: fairness, distributions, utilization, buffer search.

Percentiles are nearest-rank throughout: the ``p`` percentile of ``N``
sorted values is element ``ceil(p * N) - 1`` (the minimum for ``p = 0``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import FairnessBand, theorem2_cap
from .engine import SimConfig, Trace, run


def nearest_rank(values, p: float) -> float:
    """Nearest-rank percentile of ``values`` (``p`` in [0, 1])."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"percentile must lie in [0, 1], got {p}")
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError("percentile of an empty sample")
    rank = max(1, math.ceil(p * arr.size - 1e-12))
    return float(np.partition(arr, rank - 1)[rank - 1])


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    total: int
    cutoff: float | None = None

    def __post_init__(self):
        if int(self.counts.sum()) != self.total:
            raise ValueError("histogram counts do not sum to the total")
        if np.any(np.diff(self.edges) <= 0):
            raise ValueError("histogram edges must be strictly increasing")

    def to_dict(self) -> dict:
        return {
            "edges": [float(x) for x in self.edges],
            "counts": [int(x) for x in self.counts],
            "total": self.total,
            "cutoff": self.cutoff,
        }


def measure_fairness(trace_or_windows, bdp: float | None = None,
                     n: int | None = None, warmup: int = 0) -> FairnessBand:
    """Band spanned by the 1st and 99th percentile per-flow windows.

    Accepts a trace recorded with per-flow windows, or a raw
    ``(slots, n)`` window array together with ``bdp``.
    """
    if isinstance(trace_or_windows, Trace):
        trace = trace_or_windows
        if trace.windows is None:
            raise ValueError("measure_fairness needs a trace recorded with per-flow windows")
        windows = trace.windows
        bdp = trace.config.link.bdp if bdp is None else bdp
        n = trace.config.n_flows if n is None else n
    else:
        windows = np.asarray(trace_or_windows, dtype=float)
        if windows.ndim == 1:
            windows = windows[:, None]
        if bdp is None:
            raise ValueError("bdp is required with a raw window array")
        n = windows.shape[1] if n is None else n
    windows = windows[warmup:]
    scale = n / bdp
    lo = nearest_rank(windows, 0.01) * scale
    hi = nearest_rank(windows, 0.99) * scale
    return FairnessBand(lo, hi)


def queue_histogram(trace: Trace, bins: int = 50, band: FairnessBand | None = None) -> Histogram:
    """Distribution of queue occupancy over all slots.

    The edges span ``[0, B]``.  ``cutoff`` is ``B - delta_hi * bdp / sqrt(n)``,
    the depth the queue should stay above once flows are desynchronized.
    """
    if int(bins) != bins or bins < 1:
        raise ValueError(f"bins must be an integer >= 1, got {bins}")
    if len(trace) == 0:
        raise ValueError("queue histogram of an empty trace")
    link = trace.config.link
    top = link.buffer if link.buffer > 0 else 1.0
    edges = np.linspace(0.0, top, bins + 1)
    counts, _ = np.histogram(np.clip(trace.Q, 0.0, top), bins=edges)
    cutoff = None
    if band is None and trace.windows is not None:
        band = measure_fairness(trace)
    if band is not None:
        cutoff = link.buffer - band.delta_hi * link.bdp / math.sqrt(trace.config.n_flows)
    return Histogram(edges, counts.astype(np.int64), len(trace), cutoff)


@dataclass(frozen=True)
class FlowsPerLoss:
    counts: np.ndarray
    mean: float
    cap: float | None

    @property
    def exceed_cap(self) -> int:
        if self.cap is None:
            return 0
        return int(np.count_nonzero(self.counts > self.cap + 1e-9))


def flows_per_loss(trace: Trace, band: FairnessBand | None = None) -> FlowsPerLoss:
    """Number of reacting flows at each congestion event, with the reacting-flow cap."""
    counts = trace.n_decreasing[trace.signal]
    mean = float(counts.mean()) if counts.size else 0.0
    cap = None
    if band is not None:
        cap = theorem2_cap(band, trace.config.link.bdp, trace.config.n_flows)
    return FlowsPerLoss(counts, mean, cap)


def sliding_mean(values, window: int) -> np.ndarray:
    """Means of every run of ``window`` consecutive values, summed left to right."""
    arr = np.asarray(values, dtype=float)
    if int(window) != window or window < 1:
        raise ValueError(f"window must be an integer >= 1, got {window}")
    if window > arr.size:
        raise ValueError(f"window of {window} slots is longer than the {arr.size}-slot trace")
    if window == 1:
        return arr.copy()
    csum = np.concatenate(([0.0], np.cumsum(arr)))
    return (csum[window:] - csum[:-window]) / window


def min_utilization(trace, window: int = 10, percentile: float = 0.01, warmup: int = 0) -> float:
    """Percentile of the ``window``-slot average utilization."""
    mu = trace.mu if isinstance(trace, Trace) else np.asarray(trace, dtype=float)
    return nearest_rank(sliding_mean(mu[warmup:], window), percentile)


@dataclass
class SearchResult:
    """Outcome of a minimum-buffer search.

    ``buffer`` is the smallest buffer found to reach the target; the target
    failed at ``bracket[0]`` and held at ``bracket[1]``.
    """

    buffer: float | None
    bracket: tuple[float, float]
    satisfiable: bool
    monotone: bool
    probes: dict = field(default_factory=dict)
    evaluations: int = 0

    def to_dict(self) -> dict:
        return {
            "buffer": self.buffer,
            "bracket": list(self.bracket),
            "satisfiable": self.satisfiable,
            "monotone": self.monotone,
            "evaluations": self.evaluations,
        }


def search_min_buffer(template: SimConfig, target: float = 1.0, tolerance: float = 1.0,
                      window: int = 1, percentile: float = 0.0, warmup: int = 0,
                      upper: float | None = None) -> SearchResult:
    """Bisect the buffer size for the smallest one meeting ``target`` utilization.

    The search covers ``[0, 2 * bdp]``.  Utilization is probed at 0, bdp and
    2 bdp first; ``monotone`` records whether those probes were ordered.
    The defaults measure the true per-slot minimum, so a single dip counts.
    """
    if not 0 < target <= 1:
        raise ValueError(f"target utilization must lie in (0, 1], got {target}")
    if not tolerance > 0:
        raise ValueError(f"tolerance must be positive, got {tolerance}")
    bdp = template.link.bdp
    hi = 2.0 * bdp if upper is None else float(upper)
    cache: dict[float, float] = {}

    def util(buffer: float) -> float:
        if buffer not in cache:
            cfg = template.replace(buffer=buffer, record_flows=False)
            cache[buffer] = min_utilization(run(cfg), window, percentile, warmup)
        return cache[buffer]

    probes = {0.0: util(0.0), bdp: util(min(bdp, hi)), hi: util(hi)}
    vals = [probes[k] for k in sorted(probes)]
    monotone = all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))
    if probes[hi] < target:
        return SearchResult(None, (hi, hi), False, monotone, probes, len(cache))
    if probes[0.0] >= target:
        return SearchResult(0.0, (0.0, 0.0), True, monotone, probes, len(cache))
    lo = 0.0
    if bdp < hi:
        if probes[bdp] >= target:
            hi = bdp
        else:
            lo = bdp
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        if util(mid) >= target:
            hi = mid
        else:
            lo = mid
    return SearchResult(hi, (lo, hi), True, monotone, probes, len(cache))


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of ``log(y)`` against ``log(x)``; needs positive values."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.size < 2 or np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log slope needs at least two points with positive coordinates")
    lx, ly = np.log(x), np.log(y)
    return float(np.polyfit(lx, ly, 1)[0])


def oscillation(trace: Trace, warmup: int = 0) -> float:
    """Peak-to-trough swing of the aggregate window."""
    w = trace.W[warmup:]
    return float(w.max() - w.min())


def summarize(trace: Trace, min_buffer=None, theorem_reports=(), bins: int = 50) -> dict:
    """Summary record with stable key names for JSON output."""
    from . import __version__

    band = measure_fairness(trace) if trace.windows is not None else None
    hist = queue_histogram(trace, bins, band)
    width = min(10, len(trace))
    return {
        "config": trace.config.to_dict(),
        "min_buffer": min_buffer,
        "fairness": None if band is None else {"lo": band.delta_lo, "hi": band.delta_hi},
        "utilization": {
            "p1": min_utilization(trace, width, 0.01),
            "p50": min_utilization(trace, width, 0.5),
            "min": float(trace.mu.min()),
        },
        "histogram": hist.to_dict(),
        "theorem_reports": [r.to_dict() for r in theorem_reports],
        "version": __version__,
    }
