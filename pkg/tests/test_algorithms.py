from fractions import Fraction

import numpy as np
import pytest

from bufsim.algorithms import (
    AlgorithmKind,
    FlowState,
    GAIN_CYCLE,
    START_PHASES,
    advance_bbr,
    bbr_increment,
    decrease,
    exact_beta,
    increase,
    parse_algorithm,
)


def flow(name, w, **kw):
    return FlowState(w, parse_algorithm(name), **kw)


def test_reno_halves_and_adds_one():
    assert decrease(flow("reno", 100)).window == 50
    assert increase(flow("reno", 100)).window == 101


def test_cubic_and_md_decrease():
    assert decrease(flow("cubic", 1024)).window == 717
    assert decrease(FlowState(100, AlgorithmKind.md(0.6))).window == pytest.approx(60)


def test_scalable_matches_per_ack_loop():
    # 0.01 packets per ack, with a window's worth of acks arriving each RTT
    w = 100.0
    acked_window = w
    for _ in range(100):
        acked_window += 0.01 * acked_window / 100
    got = increase(flow("scalable", w)).window
    assert got == pytest.approx(101.0)
    assert got == pytest.approx(acked_window, rel=1e-3)
    assert decrease(flow("scalable", 800)).window == 700


def test_exact_betas():
    assert exact_beta(AlgorithmKind.reno()) == Fraction(1, 2)
    assert exact_beta(AlgorithmKind.cubic()) == Fraction(717, 1024)
    assert exact_beta(AlgorithmKind.scalable()) == Fraction(7, 8)


def test_gain_cycle_nets_to_one():
    assert sum(GAIN_CYCLE) == 8
    assert 1 not in START_PHASES and len(START_PHASES) == 7


def test_bbr_cycle_reacts_only_in_probe_phase():
    f = flow("bbr", 125, bbr_phase=0, bbr_base_rate=100)
    after = decrease(f)
    assert after.bbr_phase == 1 and after.window == pytest.approx(100)
    idle = flow("bbr", 100, bbr_phase=4, bbr_base_rate=100)
    assert decrease(idle) == idle


def test_bbr_cycle_walks_gains():
    # each slot moves the window by (gain - 1) * base, so a full cycle nets zero
    f = flow("bbr", 100, bbr_phase=7, bbr_base_rate=100)
    seen = []
    for _ in range(8):
        f = advance_bbr(f, saw_loss=False)
        seen.append(round(f.window, 9))
    assert seen == [125, 100, 100, 100, 100, 100, 100, 100]


def test_bbr_increment_distribution():
    u = np.random.default_rng(1).random(200_000)
    x = bbr_increment(np.full(u.size, 100.0), u)
    assert set(np.unique(x)) == {-25.0, 0.0, 25.0}
    p_down = np.mean(x < 0)
    assert abs(p_down - 0.125) < 3 * np.sqrt(0.125 * 0.875 / u.size)
    assert abs(np.mean(x > 0) - 0.125) < 3 * np.sqrt(0.125 * 0.875 / u.size)


def test_randomized_reno_halving_frequency():
    rng = np.random.default_rng(2)
    f = flow("randomized_reno", 8)
    halves = sum(decrease(f, rng).window == 4 for _ in range(40_000))
    assert abs(halves / 40_000 - 1 / 8) < 3 * np.sqrt(0.125 * 0.875 / 40_000)


def test_random_kinds_require_rng():
    with pytest.raises(ValueError):
        decrease(flow("randomized_reno", 8))
    with pytest.raises(ValueError):
        decrease(flow("bbr_increment", 8, bbr_base_rate=8))


@pytest.mark.parametrize("spec", ["vegas", {"name": "md"}, {"name": "md", "beta": 1.5}])
def test_parse_rejects_bad_specs(spec):
    with pytest.raises(ValueError):
        parse_algorithm(spec)


def test_parse_aliases():
    assert parse_algorithm("bbr").name == "bbr_cycle"
    assert parse_algorithm({"name": "md", "beta": 0.6}).beta == 0.6
