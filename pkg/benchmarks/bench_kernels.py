"""Compare the compiled and numpy kernels on a few representative runs.

    python benchmarks/bench_kernels.py [--repeat 3]

Each case is run on every available backend; the table reports the best
wall time and confirms the traces are identical.
"""

import argparse
import time

import numpy as np

from bufsim import LinkConfig, SimConfig, Simulator
from bufsim.kernels import available_backends

CASES = [
    ("single reno, bdp 1000", SimConfig(LinkConfig.from_bdp(1000, 500), 1, "reno", duration=20_000)),
    ("16 reno minimal", SimConfig(LinkConfig.from_bdp(1000, 100), 16, "reno", "minimal",
                                  duration=5000)),
    ("64 reno sqrt_extra", SimConfig(LinkConfig.from_bdp(1000, 100), 64, "reno", "sqrt_extra",
                                     duration=5000)),
    ("100 bbr_increment", SimConfig(LinkConfig.from_bdp(1000, 100), 100, "bbr_increment",
                                    "fully_synchronized", duration=5000)),
    ("1024 reno sqrt_extra, bdp 1e5", SimConfig(LinkConfig.from_bdp(1e5, 100), 1024, "reno",
                                                "sqrt_extra", duration=2000)),
    ("1024 reno, every slot lossy", SimConfig(LinkConfig.from_bdp(1000, 0), 1024, "reno",
                                              "sqrt_extra", duration=2000)),
    ("10^4 reno theorem mode", SimConfig(LinkConfig.from_bdp(1e5, 20), 10_000, "reno",
                                         "sqrt_extra", duration=500, theorem_mode=True,
                                         fairness_clamp=(0.5, 2.0))),
]


def time_case(cfg, impl, repeat):
    best, trace = float("inf"), None
    for _ in range(repeat):
        sim = Simulator(cfg)
        start = time.perf_counter()
        trace = sim.run(impl=impl)
        best = min(best, time.perf_counter() - start)
    return best, trace


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    backends = available_backends()
    names = list(backends)
    print(f"{'case':32s}" + "".join(f"{n:>10s}" for n in names) + "   speedup  identical")
    for label, cfg in CASES:
        times, traces = [], []
        for name in names:
            t, trace = time_case(cfg, backends[name], args.repeat)
            times.append(t)
            traces.append(trace)
        same = all(np.array_equal(traces[0].W, t.W) for t in traces[1:])
        speedup = f"{times[0] / times[-1]:8.1f}x" if len(times) > 1 else "       -"
        print(f"{label:32s}" + "".join(f"{t:9.4f}s" for t in times) + f"  {speedup}  {same}")


if __name__ == "__main__":
    main()
