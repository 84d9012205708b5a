import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bufsim import LinkConfig, SimConfig, Trace, run
from bufsim.analysis import (
    Histogram,
    flows_per_loss,
    loglog_slope,
    measure_fairness,
    min_utilization,
    nearest_rank,
    queue_histogram,
    search_min_buffer,
    sliding_mean,
    summarize,
)
from bufsim.bounds import FairnessBand


def test_nearest_rank():
    values = list(range(1, 101))
    assert nearest_rank(values, 0.01) == 1
    assert nearest_rank(values, 0.99) == 99
    assert nearest_rank(values, 0.0) == 1
    assert nearest_rank(values, 1.0) == 100
    assert nearest_rank([5, 1, 3], 0.5) == 3


def test_fairness_of_known_sawtooth():
    w = np.concatenate([np.arange(50, 101)] * 4).astype(float)
    band = measure_fairness(w, bdp=100)
    assert band.delta_lo == pytest.approx(nearest_rank(w, 0.01) / 100)
    assert band.delta_hi == pytest.approx(nearest_rank(w, 0.99) / 100)
    assert 0.5 <= band.delta_lo < 0.52 and 0.98 < band.delta_hi <= 1.0


def test_fairness_of_equal_shares():
    band = measure_fairness(np.full((20, 8), 25.0), bdp=200)
    assert (band.delta_lo, band.delta_hi) == (1.0, 1.0)


@given(st.floats(0.01, 100))
def test_fairness_scale_equivariant(c):
    w = np.random.default_rng(3).uniform(2, 50, size=(30, 6))
    a = measure_fairness(w, bdp=100)
    b = measure_fairness(w * c, bdp=100 * c)
    assert a.delta_lo == pytest.approx(b.delta_lo)
    assert a.delta_hi == pytest.approx(b.delta_hi)


def test_fairness_needs_windows():
    trace = run(SimConfig(LinkConfig.from_bdp(100, 10), 2, "reno", duration=10))
    with pytest.raises(ValueError):
        measure_fairness(trace)


def test_min_utilization_constant_and_smoothing():
    assert min_utilization(np.ones(50)) == 1.0
    trace = run(SimConfig(LinkConfig.from_bdp(1000, 500), 1, "reno", duration=3000))
    assert min_utilization(trace, 1, 0.0) == pytest.approx(0.75, abs=1e-3)
    assert min_utilization(trace, 10, 0.0) >= min_utilization(trace, 1, 0.0)
    with pytest.raises(ValueError):
        min_utilization(np.ones(5), window=6)


def test_sliding_mean():
    assert list(sliding_mean([1, 2, 3, 4], 2)) == [1.5, 2.5, 3.5]


def test_queue_histogram_totals():
    trace = run(SimConfig(LinkConfig.from_bdp(1000, 1000), 64, "reno", "sqrt_extra",
                          duration=500, record_flows=True))
    hist = queue_histogram(trace, 20)
    assert hist.total == 500 and hist.counts.sum() == 500
    assert hist.cutoff is not None and hist.cutoff < 1000
    with pytest.raises(ValueError):
        queue_histogram(trace, 0)


def test_constant_queue_single_bin():
    cfg = SimConfig(LinkConfig.from_bdp(100, 50), 1, "reno", duration=20)
    z = np.zeros(20)
    trace = Trace(cfg, np.full(20, 130.0), z.astype(bool), z.astype(bool), z.astype(int),
                  z, z, z, z.astype(int))
    hist = queue_histogram(trace, 10, band=FairnessBand(1, 1))
    assert np.count_nonzero(hist.counts) == 1


def test_histogram_invariants():
    with pytest.raises(ValueError):
        Histogram(np.array([0.0, 1.0]), np.array([2]), 3)


def test_queue_concentrates_above_cutoff():
    trace = run(SimConfig(LinkConfig.from_bdp(1000, 1000), 64, "reno", "sqrt_extra",
                          duration=2000, record_flows=True))
    band = measure_fairness(trace, warmup=200)
    cutoff = 1000 - band.delta_hi * 1000 / 8
    assert np.mean(trace.Q[200:] >= cutoff) > 0.95


def test_synchronized_queue_spreads():
    trace = run(SimConfig(LinkConfig.from_bdp(1000, 1000), 64, "reno", "fully_synchronized",
                          duration=2000))
    # every flow halves together, so the aggregate swings over half of bdp + B
    assert trace.W[100:].min() == pytest.approx(1000, rel=0.05)
    assert np.mean(trace.Q == 0) > 0.0


def test_flows_per_loss():
    full = run(SimConfig(LinkConfig.from_bdp(100, 10), 8, "reno", "fully_synchronized",
                         duration=200))
    fpl = flows_per_loss(full)
    assert np.all(fpl.counts == 8) and fpl.mean == 8
    sq = run(SimConfig(LinkConfig.from_bdp(1000, 100), 16, "reno", "sqrt_extra", duration=500,
                       record_flows=True))
    counts = sq.n_decreasing[sq.signal]
    need = np.ceil(16 / (1 + sq.d_min[sq.signal] / 2))
    assert np.all(counts <= need + 4)
    assert flows_per_loss(sq, FairnessBand(1, 4)).cap == pytest.approx(256 / 4000 + 4)


def test_flows_per_loss_bernoulli_mean():
    trace = run(SimConfig(LinkConfig.from_bdp(1000, 0), 10_000, "reno",
                          {"name": "bernoulli", "p": 0.125}, duration=20))
    fpl = flows_per_loss(trace)
    assert abs(fpl.mean - 1250) < 3 * math.sqrt(10_000 * 0.125 * 0.875 / 20)


def test_search_single_reno():
    tmpl = SimConfig(LinkConfig.from_bdp(1000, 0), 1, "reno", duration=2000)
    res = search_min_buffer(tmpl, 1.0)
    assert res.satisfiable and res.monotone
    assert abs(res.buffer - 1000) <= 2
    lo, hi = res.bracket
    assert hi - lo <= 1.0
    at = lambda b: min_utilization(run(tmpl.replace(buffer=b)), 1, 0.0)
    assert at(res.buffer) >= 1.0 and at(lo) < 1.0


def test_search_unsatisfiable():
    tmpl = SimConfig(LinkConfig.from_bdp(100, 0), 1, "reno", duration=500)
    res = search_min_buffer(tmpl, 1.0, upper=50)
    assert not res.satisfiable and res.buffer is None


def test_search_bounded_by_sqrt_rule():
    tmpl = SimConfig(LinkConfig.from_bdp(1000, 0), 64, "reno", "sqrt_extra", duration=1000)
    res = search_min_buffer(tmpl, 1.0, window=10, percentile=0.01)
    trace = run(tmpl.replace(buffer=res.buffer, record_flows=True))
    assert res.buffer <= measure_fairness(trace).delta_hi * 1000 / 8


def test_loglog_slope():
    n = np.array([4, 16, 64, 256])
    assert loglog_slope(n, 1000 / np.sqrt(n)) == pytest.approx(-0.5)
    with pytest.raises(ValueError):
        loglog_slope([1, 2], [1, 0])


def test_summary_keys():
    trace = run(SimConfig(LinkConfig.from_bdp(100, 20), 4, "reno", duration=50, record_flows=True))
    s = summarize(trace)
    assert list(s) == ["config", "min_buffer", "fairness", "utilization", "histogram",
                       "theorem_reports", "version"]
    assert set(s["utilization"]) >= {"p1", "p50"}
