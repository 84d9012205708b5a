"""Executable checks of the multi-flow theorems.

Trace checks (``thm2``, ``thm3``, ``thm4``, ``appc``) scan a recorded run
slot by slot: a slot counts only if the theorem's premises held there, and
the conclusion is asserted only on those slots.  Monte Carlo checks
(``thm5``, ``lemma6``, ``random-loss``) repeat the randomized one-slot
experiment behind a probabilistic bound.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .algorithms import bbr_increment
from .bounds import (
    FairnessBand,
    bbr_buffer,
    bernoulli_sync_tail,
    random_loss_buffer,
    theorem2_cap,
    utilization_floor,
)
from .engine import Trace

TRACE_CHECKS = ("thm2", "thm3", "thm4", "appc")
MONTE_CARLO_CHECKS = ("thm5", "lemma6", "random-loss")
MIN_TRIALS = 1000
CHUNK = 10_000
_TOL = 1e-9


@dataclass
class VerificationReport:
    theorem_id: str
    slots: int
    premise_slots: int
    violation_slots: list = field(default_factory=list)
    margin: float | None = None
    bound: float | None = None
    detail: dict = field(default_factory=dict)

    @property
    def premises_held(self) -> bool:
        return self.premise_slots > 0

    @property
    def passed(self) -> bool:
        return self.premises_held and not self.violation_slots

    @property
    def status(self) -> str:
        if not self.premises_held:
            return "premises never held"
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        return {
            "theorem": self.theorem_id,
            "status": self.status,
            "slots": self.slots,
            "premise_slots": self.premise_slots,
            "violations": len(self.violation_slots),
            "violation_slots": [int(t) for t in self.violation_slots[:20]],
            "margin": self.margin,
            "bound": self.bound,
            **self.detail,
        }


def premise_mask(trace: Trace, band: FairnessBand) -> np.ndarray:
    """Slots where every window lies in the band and at least 2, and few flows react."""
    if trace.windows is None:
        raise ValueError("theorem checks need a trace recorded with per-flow windows")
    cfg = trace.config
    n, bdp = cfg.n_flows, cfg.link.bdp
    lo, hi = band.window_range(bdp, n)
    w = trace.windows  # state at the start of each slot
    wmin = w.min(axis=1)
    in_band = (wmin >= max(lo, 2.0) - _TOL) & (w.max(axis=1) <= hi + _TOL)
    few = trace.n_decreasing <= theorem2_cap(band, bdp, n) + _TOL
    return in_band & few


def _epochs(premise: np.ndarray, signal: np.ndarray) -> np.ndarray:
    """Slots inside a premise-holding run that started at a congestion event."""
    out = np.zeros_like(premise)
    active = False
    for t in range(premise.shape[0]):
        if not premise[t]:
            active = False
        elif signal[t]:
            active = True
        out[t] = active
    return out


def verify_theorem(trace: Trace, theorem_id: str, band: FairnessBand) -> VerificationReport:
    cfg = trace.config
    n, bdp, buffer = cfg.n_flows, cfg.link.bdp, cfg.link.buffer
    slots = len(trace)
    if theorem_id == "appc":
        return _verify_appendix_c(trace)
    if theorem_id not in TRACE_CHECKS:
        raise ValueError(f"unknown trace check {theorem_id!r}; expected one of {', '.join(TRACE_CHECKS)}")
    premise = premise_mask(trace, band)
    if theorem_id == "thm3":
        premise &= buffer >= band.delta_hi * bdp / math.sqrt(n) - _TOL
    mask = _epochs(premise, trace.signal)
    if theorem_id == "thm2":
        bound = bdp + buffer - band.delta_hi * bdp / math.sqrt(n)
        slack = trace.W - bound
    elif theorem_id == "thm3":
        bound = 1.0
        slack = trace.mu - 1.0
    else:
        bound = utilization_floor(band, n)
        slack = trace.mu - bound
    bad = np.flatnonzero(mask & (slack < -_TOL * max(1.0, bdp)))
    margin = float(slack[mask].min()) if mask.any() else None
    return VerificationReport(theorem_id, slots, int(mask.sum()), bad.tolist(), margin, bound,
                              {"delta_hi": band.delta_hi, "delta_lo": band.delta_lo})


def _verify_appendix_c(trace: Trace) -> VerificationReport:
    cfg = trace.config
    n = cfg.n_flows
    if cfg.algorithm.name != "reno":
        return VerificationReport("appc", len(trace), 0, detail={"reason": "needs reno flows"})
    size = trace.n_decreasing[:-1]
    dmin = trace.d_min[:-1]
    need = np.ceil(n / (1.0 + np.maximum(dmin, 2.0) / 2.0) - 1e-12)
    premise = (size > 0) & (size >= need) & (dmin >= 2.0 - _TOL) & (trace.adjusted[:-1] == 0)
    growth = trace.W[1:] - trace.W[:-1]
    bad = np.flatnonzero(premise & (growth > _TOL * max(1.0, cfg.link.bdp)))
    margin = float(-growth[premise].max()) if premise.any() else None
    return VerificationReport("appc", len(trace), int(premise.sum()), bad.tolist(), margin, 0.0)


@dataclass(frozen=True)
class MonteCarloResult:
    check_id: str
    trials: int
    hits: int
    bound: float
    params: dict

    @property
    def empirical(self) -> float:
        return self.hits / self.trials

    @property
    def allowance(self) -> float:
        return self.bound + 3.0 * math.sqrt(self.bound / self.trials)

    @property
    def passed(self) -> bool:
        return self.empirical <= self.allowance

    def to_dict(self) -> dict:
        return {
            "theorem": self.check_id,
            "status": "pass" if self.passed else "fail",
            "trials": self.trials,
            "empirical": self.empirical,
            "bound": self.bound,
            "allowance": self.allowance,
            **self.params,
        }


def _thm5_chunk(rng, size, n, bdp, buffer, band):
    # worst case: every flow sits at the top of the band and sees the loss
    base = np.full(n, band.delta_hi * bdp / n)
    x = bbr_increment(base, rng.random((size, n)))
    total = bdp + buffer + np.cumsum(x, axis=1)[:, -1]
    return int(np.count_nonzero(total < bdp))


def _lemma6_chunk(rng, size, n, bdp, band, threshold):
    lo, hi = band.window_range(bdp, n)
    w = lo + (hi - lo) * rng.random((size, n))
    p = np.minimum(1.0, 1.0 / w)
    count = np.count_nonzero(rng.random((size, n)) < p, axis=1)
    return int(np.count_nonzero(count > threshold + _TOL))


def _random_loss_chunk(rng, size, n, bdp, buffer, band, p):
    w = np.full(n, band.delta_hi * bdp / n)
    hit = rng.random((size, n)) < p
    drop = (0.5 * w * hit).sum(axis=1)
    return int(np.count_nonzero(bdp + buffer - drop < bdp))


def _run_chunk(args):
    check_id, seed, index, size, params = args
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))
    band = FairnessBand(params["delta_lo"], params["delta_hi"])
    if check_id == "thm5":
        return _thm5_chunk(rng, size, params["n"], params["bdp"], params["buffer"], band)
    if check_id == "lemma6":
        return _lemma6_chunk(rng, size, params["n"], params["bdp"], band, params["threshold"])
    return _random_loss_chunk(rng, size, params["n"], params["bdp"], params["buffer"], band,
                              params["p"])


def monte_carlo_bound(check_id: str, trials: int = 10_000, seed: int = 0, jobs: int = 1,
                      n: int = 100, bdp: float = 100.0, delta_lo: float = 1.0,
                      delta_hi: float = 2.0, delta: float = 0.05, p: float = 0.05,
                      buffer: float | None = None) -> MonteCarloResult:
    """Estimate the probability a bound controls and compare it with the bound.

    Trials run in fixed chunks of 10^4, each on its own child stream of
    ``seed``, so the result does not depend on ``jobs``.
    """
    if check_id not in MONTE_CARLO_CHECKS:
        raise ValueError(f"unknown Monte Carlo check {check_id!r}; expected one of "
                         f"{', '.join(MONTE_CARLO_CHECKS)}")
    if int(trials) != trials or trials < MIN_TRIALS:
        raise ValueError(f"Monte Carlo checks need at least {MIN_TRIALS} trials, got {trials}")
    band = FairnessBand(delta_lo, delta_hi)
    params = {"n": n, "bdp": bdp, "delta_lo": delta_lo, "delta_hi": delta_hi}
    if check_id == "thm5":
        buffer = bbr_buffer(band, bdp, n, delta) if buffer is None else buffer
        params.update(delta=delta, buffer=buffer)
        bound = delta
    elif check_id == "lemma6":
        threshold, bound = bernoulli_sync_tail(band, bdp, n)
        params.update(threshold=threshold)
    else:
        buffer = random_loss_buffer(band, bdp, p, n, delta) if buffer is None else buffer
        params.update(p=p, delta=delta, buffer=buffer)
        bound = delta
    tasks = []
    for index, start in enumerate(range(0, trials, CHUNK)):
        tasks.append((check_id, seed, index, min(CHUNK, trials - start), params))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            hits = sum(pool.map(_run_chunk, tasks))
    else:
        hits = sum(_run_chunk(t) for t in tasks)
    return MonteCarloResult(check_id, int(trials), hits, bound, params)


@dataclass(frozen=True)
class AppendixCResult:
    per_n: dict
    vectors: int
    subsets: int
    violations: int

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.subsets > 0

    def to_dict(self) -> dict:
        return {
            "theorem": "appc-exhaustive",
            "status": "pass" if self.passed else "fail",
            "vectors": self.vectors,
            "subsets": self.subsets,
            "violations": self.violations,
            "per_n": {str(k): v for k, v in self.per_n.items()},
        }


def appendix_c_check(n_max: int = 8, low: int = 2, high: int = 10, samples: int = 100_000,
                     seed: int = 0) -> AppendixCResult:
    """Check the large-decrease-set condition on integer window vectors.

    For each ``n`` up to ``n_max``, every vector in ``[low, high]^n`` is
    enumerated when there are at most ``samples`` of them; otherwise
    ``samples`` vectors are drawn uniformly.  Every qualifying subset of
    every vector is checked.
    """
    if low < 2 or high < low:
        raise ValueError(f"window range must satisfy 2 <= low <= high, got [{low}, {high}]")
    if n_max > 16:
        raise ValueError("subset enumeration is limited to n <= 16")
    per_n = {}
    vectors = subsets = violations = 0
    width = high - low + 1
    for n in range(1, n_max + 1):
        if width ** n <= samples:
            grids = np.meshgrid(*[np.arange(low, high + 1)] * n, indexing="ij")
            w = np.stack([g.ravel() for g in grids], axis=1)
            mode = "exhaustive"
        else:
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(n,))))
            w = rng.integers(low, high + 1, size=(samples, n))
            mode = "sampled"
        w = np.ascontiguousarray(w, dtype=np.int64)
        checked, bad = kernels.appendix_c_violations(w)
        per_n[n] = {"mode": mode, "vectors": int(w.shape[0]), "subsets": int(checked),
                    "violations": int(bad)}
        vectors += w.shape[0]
        subsets += checked
        violations += bad
    return AppendixCResult(per_n, vectors, subsets, violations)


DEFAULT_SUITE = ("thm2", "thm3", "thm4", "appc", "appc-exhaustive", "thm5", "lemma6",
                 "random-loss")
DEFAULT_BAND = (0.5, 2.0)


def default_theorem_config(seed: int = 0):
    """Theorem-mode Reno run whose buffer equals the Theorem 3 threshold."""
    from .engine import SimConfig
    from .model import LinkConfig

    lo, hi = DEFAULT_BAND
    return SimConfig(LinkConfig.from_bdp(1000.0, hi * 1000.0 / 8), 64, "reno", "sqrt_extra",
                     duration=1000, seed=seed, fairness_clamp=DEFAULT_BAND, theorem_mode=True,
                     record_flows=True)


def default_appc_config(seed: int = 0):
    """Free-running Reno with minimal decrease sets, for the trace scan."""
    from .engine import SimConfig
    from .model import LinkConfig

    return SimConfig(LinkConfig.from_bdp(1000.0, 100.0), 16, "reno", "minimal",
                     duration=2000, seed=seed, record_flows=True)


def _merge(reports: list[VerificationReport], seeds: int) -> dict:
    head = reports[0]
    margins = [r.margin for r in reports if r.margin is not None]
    merged = VerificationReport(
        head.theorem_id,
        sum(r.slots for r in reports),
        sum(r.premise_slots for r in reports),
        [s for r in reports for s in r.violation_slots],
        min(margins) if margins else None,
        head.bound,
        dict(head.detail),
    )
    out = merged.to_dict()
    out["seeds"] = seeds
    return out


def run_suite(suite=DEFAULT_SUITE, sim=None, seeds: int = 10, band=None, trials: int = 10_000,
              delta: float = 0.05, seed: int = 0, jobs: int = 1) -> list[dict]:
    """Run each named check and return one report dict per check, in suite order.

    Trace checks use ``sim`` (one run per seed ``sim.seed + k``) when given,
    otherwise the built-in configurations.  ``band`` defaults to the
    configured fairness clamp, then to the band measured on the first run.
    """
    from .analysis import measure_fairness
    from .engine import run

    results = []
    for check in suite:
        if check in TRACE_CHECKS:
            if sim is not None:
                base = sim.replace(record_flows=True)
            elif check == "appc":
                base = default_appc_config(seed)
            else:
                base = default_theorem_config(seed)
            use_band = band
            if use_band is None and base.fairness_clamp is not None:
                use_band = base.fairness_clamp
            reports = []
            for k in range(seeds):
                trace = run(base.replace(seed=(base.seed + k) % 2**64))
                b = FairnessBand(*use_band) if use_band is not None else measure_fairness(trace)
                if use_band is None:
                    use_band = (b.delta_lo, b.delta_hi)
                reports.append(verify_theorem(trace, check, b))
            results.append(_merge(reports, seeds))
        elif check == "appc-exhaustive":
            results.append(appendix_c_check(seed=seed).to_dict())
        elif check == "thm5":
            lo, hi = band or DEFAULT_BAND
            results.append(monte_carlo_bound("thm5", trials, seed, jobs, n=100, bdp=1000.0,
                                             delta_lo=lo, delta_hi=hi, delta=delta).to_dict())
        elif check == "lemma6":
            results.append(monte_carlo_bound("lemma6", max(trials, 100_000), seed, jobs, n=100,
                                             bdp=100.0, delta_lo=1.0, delta_hi=4.0).to_dict())
        elif check == "random-loss":
            lo, hi = band or DEFAULT_BAND
            results.append(monte_carlo_bound("random-loss", trials, seed, jobs, n=100,
                                             bdp=1000.0, delta_lo=lo, delta_hi=hi, p=0.05,
                                             delta=delta).to_dict())
        else:
            raise ValueError(f"unknown check {check!r}")
    return results
