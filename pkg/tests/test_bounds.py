import math

import pytest
from hypothesis import given, strategies as st

from bufsim.algorithms import AlgorithmKind
from bufsim.bounds import (
    CHERNOFF_TAIL,
    FairnessBand,
    bbr_buffer,
    bernoulli_sync_tail,
    compute,
    desync_window_floor,
    min_decreasing_flows,
    random_loss_buffer,
    single_flow_min_buffer,
    single_flow_utilization,
    sqrt_n_buffer,
    theorem2_window_floor,
    utilization_floor,
)

BAND = FairnessBand(1.0, 2.0)


@pytest.mark.parametrize("algo, expected", [
    ("reno", 1000.0),
    ("cubic", (1024 / 717 - 1) * 1000),
    ("scalable", 1000 / 7),
    (AlgorithmKind.md(0.6), (1 / 0.6 - 1) * 1000),
    ("bbr", 250.0),
])
def test_single_flow_full_utilization_buffers(algo, expected):
    assert single_flow_min_buffer(algo, 1000) == pytest.approx(expected)


def test_cubic_is_close_to_three_sevenths():
    assert abs(single_flow_min_buffer("cubic", 1000) - 3000 / 7) < 0.5


def test_partial_targets_and_clamp():
    assert single_flow_min_buffer("reno", 1000, 0.75) == pytest.approx(500)
    assert single_flow_min_buffer("reno", 1000, 0.4) == 0.0
    assert single_flow_min_buffer("bbr", 1000, 0.9) == pytest.approx(150)
    with pytest.raises(ValueError):
        single_flow_min_buffer("reno", 1000, 1.2)


@given(st.floats(0, 3000))
def test_single_flow_utilization_inverts_min_buffer(buffer):
    for algo in ("reno", "cubic", "bbr"):
        mu = single_flow_utilization(algo, 1000, buffer)
        assert 0 < mu <= 1
        if mu < 1:
            assert single_flow_min_buffer(algo, 1000, mu) == pytest.approx(buffer, abs=1e-6)


def test_sqrt_n_rule():
    assert sqrt_n_buffer(BAND, 1000, 100) == pytest.approx(200)
    assert utilization_floor(FairnessBand(0.5, 2.0), 10_000) == pytest.approx(0.98)
    assert utilization_floor(FairnessBand(1, 4), 4) == 0.0


@given(st.integers(1, 10_000), st.floats(0.1, 10))
def test_sqrt_n_buffer_scales_as_inverse_root(n, hi):
    band = FairnessBand(min(1.0, hi), hi)
    assert sqrt_n_buffer(band, 1000, 4 * n) == pytest.approx(sqrt_n_buffer(band, 1000, n) / 2)


def test_bbr_buffer():
    value = bbr_buffer(BAND, 1000, 100, 0.05)
    assert value == pytest.approx(2 * 1000 * math.sqrt(math.log(20)) / math.sqrt(200))
    with pytest.raises(ValueError):
        bbr_buffer(BAND, 1000, 100, 0)


@given(st.floats(1e-6, 0.5), st.floats(1e-6, 0.5))
def test_bbr_buffer_monotone_in_delta(a, b):
    lo, hi = sorted((a, b))
    assert bbr_buffer(BAND, 1000, 50, lo) >= bbr_buffer(BAND, 1000, 50, hi)


def test_desync_floor():
    assert desync_window_floor(BAND, 1000, 100, 16, 4) == pytest.approx(1100 - 4 * 2 * 1000 / 16)


def test_min_decreasing_flows():
    assert min_decreasing_flows(16, 2) == 8
    assert min_decreasing_flows(100, 8) == 20
    with pytest.raises(ValueError):
        min_decreasing_flows(16, 1)


def test_bernoulli_tail():
    threshold, prob = bernoulli_sync_tail(FairnessBand(1, 4), 100, 100)
    assert threshold == pytest.approx(110)
    assert prob == pytest.approx(CHERNOFF_TAIL)
    t2, p2 = bernoulli_sync_tail(FairnessBand(1, 4), 100, 100, delta=0.01)
    assert t2 == pytest.approx(100 + math.sqrt(200 * math.log(100)))
    assert p2 == 0.01


def test_random_loss_buffer():
    value = random_loss_buffer(BAND, 1000, 0.05, 100, 0.05)
    assert value == pytest.approx(1000 * 0.05 * (1 + math.sqrt(2 * math.log(20) / 5)))
    with pytest.raises(ValueError):
        random_loss_buffer(BAND, 1000, 0.0, 100, 0.05)


def test_theorem2_floor_and_cap():
    floor, cap = theorem2_window_floor(BAND, 1000, 250, 64)
    assert floor == pytest.approx(1000)
    assert cap == pytest.approx(4096 / 2000 + 8)
    assert theorem2_window_floor(FairnessBand(1, 10), 100, 0, 1)[0] == 0.0


def test_band_validation():
    with pytest.raises(ValueError):
        FairnessBand(2.0, 1.0)
    with pytest.raises(ValueError):
        FairnessBand(0.0, 1.0)


def test_compute_dispatch():
    assert compute("sqrt-n", delta_hi=2, bdp=1000, n=100).bound_value == pytest.approx(200)
    assert compute("single", algo="cubic", bdp=1000).bound_value == pytest.approx(
        single_flow_min_buffer("cubic", 1000))
    assert compute("thm2", delta_hi=2, bdp=1000, buffer=250, n=64).to_dict()["cap"] > 10
    with pytest.raises(ValueError):
        compute("nope")
