import numpy as np
import pytest

from bufsim import LinkConfig, SimConfig, Simulator, SyncModel, run
from bufsim.kernels import available_backends

BACKENDS = available_backends()
ALGOS = ["reno", "cubic", "scalable", "randomized_reno", "bbr_cycle", "bbr_increment",
         {"name": "md", "beta": 0.6}]
SYNCS = ["minimal", "sqrt_extra", "fully_synchronized", {"name": "bernoulli", "p": 0.2},
         {"name": "largest_first", "k": 3},
         {"name": "ecn_threshold", "threshold": 40, "mark_fraction": 0.5}]
FIELDS = ["W", "loss", "marked", "n_decreasing", "w_min", "w_max", "d_min", "adjusted",
          "windows", "decreasing"]


def cfg(n=4, bdp=100, buffer=100, algo="reno", sync="minimal", **kw):
    return SimConfig(LinkConfig.from_bdp(bdp, buffer), n, algo, sync, **kw)


def test_single_reno_halves_at_loss():
    sim = Simulator(cfg(n=1, buffer=100))
    sim.window[:] = 200
    first = sim.step()
    assert first.loss_event and first.utilization == 1.0
    assert sim.window[0] == 100
    assert sim.step().utilization == 1.0


def test_single_reno_partial_buffer():
    sim = Simulator(cfg(n=1, buffer=50))
    sim.window[:] = 150
    sim.step()
    assert sim.step().utilization == 0.75


def test_additive_increase_without_loss():
    sim = Simulator(cfg(n=4, buffer=1000))
    sim.window[:] = 10.0
    w0 = sim.step().aggregate_window
    assert sim.step().aggregate_window == pytest.approx(w0 + 4)


@pytest.mark.parametrize("algo, buffer", [("reno", 100), ("bbr_cycle", 25)])
def test_single_flow_full_utilization(algo, buffer):
    trace = run(cfg(n=1, buffer=buffer, algo=algo, duration=1000))
    assert trace.mu.min() == 1.0


def test_one_slot_run():
    assert len(run(cfg(duration=1))) == 1


def test_conservation_and_consistency():
    trace = run(cfg(n=16, bdp=1000, sync="sqrt_extra", duration=400, record_flows=True))
    assert np.all(trace.W == np.cumsum(trace.windows, axis=1)[:, -1])
    assert np.all(trace.Q == np.clip(trace.W - 1000, 0, 100))
    # decreases only happen on congestion slots
    assert not np.any(trace.decreasing.any(axis=1) & ~trace.signal)


def test_step_matches_run():
    c = cfg(n=8, bdp=200, buffer=40, sync="sqrt_extra", duration=50)
    sim = Simulator(c)
    stepped = [sim.step() for _ in range(50)]
    trace = run(c)
    assert [s.aggregate_window for s in stepped] == list(trace.W)
    assert [s.slot for s in stepped] == list(range(50))


def test_seed_determinism_and_sensitivity():
    a = run(cfg(n=16, sync="sqrt_extra", duration=300, seed=11))
    b = run(cfg(n=16, sync="sqrt_extra", duration=300, seed=11))
    c = run(cfg(n=16, sync="sqrt_extra", duration=300, seed=12))
    assert a.W.tobytes() == b.W.tobytes()
    assert a.W.tobytes() != c.W.tobytes()


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernels not built")
@pytest.mark.parametrize("algo", ALGOS)
@pytest.mark.parametrize("sync", SYNCS)
def test_backends_bit_identical(algo, sync):
    for theorem in (False, True):
        c = cfg(n=12, bdp=300, buffer=100, algo=algo, sync=sync, duration=300, seed=3,
                record_flows=True, theorem_mode=theorem,
                fairness_clamp=(0.5, 3.0) if theorem else None)
        x = run(c, impl=BACKENDS["python"])
        y = run(c, impl=BACKENDS["cython"])
        for f in FIELDS:
            assert np.array_equal(getattr(x, f), getattr(y, f), equal_nan=True), f


def test_theorem_mode_enforces_floor_clamp_and_cap():
    c = cfg(n=64, bdp=1000, buffer=250, sync="fully_synchronized", duration=200,
            theorem_mode=True, fairness_clamp=(0.5, 2.0), record_flows=True)
    trace = run(c)
    lo, hi = c.clamp_bounds
    assert trace.windows.min() >= max(2.0, lo) - 1e-9
    assert trace.windows.max() <= hi + 1e-9
    assert trace.n_decreasing.max() <= c.decrease_cap


def test_free_running_floor_is_one():
    trace = run(cfg(n=200, bdp=100, buffer=0, duration=100, record_flows=True))
    assert trace.windows.min() >= 1.0


def test_ecn_threshold_above_buffer_rejected():
    with pytest.raises(ValueError):
        cfg(buffer=10, sync=SyncModel.ecn_threshold(20))


@pytest.mark.parametrize("kw", [dict(n=0), dict(duration=0), dict(seed=-1),
                                dict(fairness_clamp=(2.0, 1.0))])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        cfg(**kw)


def test_trace_indexing():
    trace = run(cfg(duration=5, record_flows=True))
    rec = trace[-1]
    assert rec.slot == 4 and len(rec.per_flow_windows) == 4
    assert sum(rec.per_flow_windows) == pytest.approx(rec.aggregate_window)


def test_pure_python_fallback_selected_by_env():
    import os
    import subprocess
    import sys

    env = dict(os.environ, BUFSIM_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import bufsim; print(bufsim.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
