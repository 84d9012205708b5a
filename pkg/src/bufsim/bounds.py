"""Closed-form buffer and utilization bounds.

All sizes are in packets and real-valued; rounding up to whole packets is
left to whoever provisions the buffer.  Each calculator has a ``*_report``
twin in :func:`compute` that echoes its inputs for the CLI.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .algorithms import AlgorithmKind, parse_algorithm

CHERNOFF_TAIL = math.exp(-0.5)


@dataclass(frozen=True)
class FairnessBand:
    """Windows stay within ``[delta_lo, delta_hi] * bdp / n`` of the fair share."""

    delta_lo: float
    delta_hi: float

    def __post_init__(self):
        if not (0 < self.delta_lo <= self.delta_hi) or not math.isfinite(self.delta_hi):
            raise ValueError(
                f"fairness band needs 0 < delta_lo <= delta_hi, got ({self.delta_lo}, {self.delta_hi})")

    def window_range(self, bdp: float, n: int) -> tuple[float, float]:
        return self.delta_lo * bdp / n, self.delta_hi * bdp / n

    def contains(self, window: float, bdp: float, n: int, tol: float = 1e-9) -> bool:
        lo, hi = self.window_range(bdp, n)
        return lo - tol <= window <= hi + tol


@dataclass(frozen=True)
class BoundReport:
    formula_id: str
    bound_value: float
    inputs: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"formula": self.formula_id, "value": self.bound_value, "inputs": self.inputs}
        out.update(self.extra)
        return out


def _check_n(n):
    if int(n) != n or n < 1:
        raise ValueError(f"n must be an integer >= 1, got {n}")


def _check_bdp(bdp):
    if not bdp > 0:
        raise ValueError(f"bdp must be positive, got {bdp}")


def single_flow_min_buffer(kind, bdp: float, target_utilization: float = 1.0) -> float:
    """Smallest buffer keeping one flow at ``target_utilization`` after a loss.

    Multiplicative decrease by ``beta`` needs ``(target/beta - 1) * bdp``
    (Reno is ``beta = 1/2``); BBR's probing cycle needs
    ``(target - 3/4) * bdp``.  Targets below the zero-buffer utilization
    return 0.
    """
    algo = parse_algorithm(kind)
    _check_bdp(bdp)
    gamma = target_utilization
    if not 0 < gamma <= 1:
        raise ValueError(f"target utilization must lie in (0, 1], got {gamma}")
    if algo.name == "bbr_cycle":
        need = gamma - 0.75
    elif algo.is_multiplicative or algo.name == "randomized_reno":
        need = gamma / algo.beta - 1.0
    else:
        raise ValueError(f"no single-flow rule for {algo.name}")
    return max(0.0, need) * bdp


def zero_buffer_utilization(kind) -> float:
    """Utilization a single flow keeps with no buffer at all."""
    algo = parse_algorithm(kind)
    if algo.name == "bbr_cycle":
        return 0.75
    return float(algo.beta)


def single_flow_utilization(kind, bdp: float, buffer: float) -> float:
    """Minimum utilization of one flow with the given buffer."""
    algo = parse_algorithm(kind)
    _check_bdp(bdp)
    if buffer < 0:
        raise ValueError(f"buffer must be non-negative, got {buffer}")
    if algo.name == "bbr_cycle":
        return min(0.75 + buffer / bdp, 1.0)
    return min(algo.beta * (1.0 + buffer / bdp), 1.0)


def sqrt_n_buffer(band: FairnessBand, bdp: float, n: int) -> float:
    """Buffer for full utilization with ``n`` desynchronized, almost-fair flows."""
    _check_n(n)
    return band.delta_hi * bdp / math.sqrt(n)


def utilization_floor(band: FairnessBand, n: int) -> float:
    """Worst-case utilization for any buffer size: ``1 - delta_hi / sqrt(n)``."""
    _check_n(n)
    return max(0.0, 1.0 - band.delta_hi / math.sqrt(n))


def bbr_buffer(band: FairnessBand, bdp: float, n: int, delta: float) -> float:
    """Buffer keeping ``n`` probing BBR flows busy with probability ``1 - delta``."""
    _check_n(n)
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1]; delta = 0 needs an unbounded buffer (got {delta})")
    return band.delta_hi * bdp * math.sqrt(math.log(1.0 / delta)) / math.sqrt(2 * n)


def desync_window_floor(band: FairnessBand, bdp: float, buffer: float, n: int,
                        extra_flows: float) -> float:
    """Aggregate window floor when ``extra_flows`` flows beyond the minimum react."""
    _check_n(n)
    if extra_flows < 0:
        raise ValueError(f"extra flow count must be >= 0, got {extra_flows}")
    return bdp + buffer - extra_flows * band.delta_hi * bdp / n


def min_decreasing_flows(n: int, w_min: float) -> int:
    """Fewest halving Reno flows that keep the aggregate window from growing."""
    _check_n(n)
    if w_min < 2:
        raise ValueError(f"w_min must be >= 2 (the multi-flow window floor), got {w_min}")
    return math.ceil(n / (1.0 + w_min / 2.0) - 1e-12)


def bernoulli_sync_tail(band: FairnessBand, bdp: float, n: int,
                        delta: float | None = None) -> tuple[float, float]:
    """Tail bound on how many flows halve under per-flow random reactions.

    With reaction probability at most ``n / (delta_lo * bdp)``, more than
    ``n**2 / (delta_lo * bdp) + sqrt(n)`` flows react with probability at most
    ``exp(-1/2)``.  Passing ``delta`` widens the slack term to
    ``sqrt(2 n ln(1/delta))`` and returns ``delta`` as the probability.
    """
    _check_n(n)
    _check_bdp(bdp)
    mean_cap = n * n / (band.delta_lo * bdp)
    if delta is None:
        return mean_cap + math.sqrt(n), CHERNOFF_TAIL
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return mean_cap + math.sqrt(2 * n * math.log(1.0 / delta)), delta


def random_loss_buffer(band: FairnessBand, bdp: float, p: float, n: int, delta: float) -> float:
    """Buffer for Reno flows that each see a loss independently with probability ``p``."""
    _check_n(n)
    if not 0 < p <= 1:
        raise ValueError(f"p must lie in (0, 1] (np = 0 gives no bound), got {p}")
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    slack = math.sqrt(2 * math.log(1.0 / delta) / (n * p))
    return band.delta_hi / 2 * bdp * p * (1 + slack)


def theorem2_cap(band: FairnessBand, bdp: float, n: int) -> float:
    """Most flows that may react between two times for the window floor to hold."""
    _check_n(n)
    return n * n / (band.delta_hi * bdp) + math.sqrt(n)


def theorem2_window_floor(band: FairnessBand, bdp: float, buffer: float,
                          n: int) -> tuple[float, float]:
    """``(floor, cap)``: aggregate window floor and the reacting-flow cap it needs."""
    _check_n(n)
    floor = max(0.0, bdp + buffer - band.delta_hi * bdp / math.sqrt(n))
    return floor, theorem2_cap(band, bdp, n)


FORMULAS = ("single", "sqrt-n", "util-floor", "bbr", "desync", "min-decreasing",
            "bernoulli-tail", "random-loss", "thm2")


def compute(formula: str, **kw) -> BoundReport:
    """Evaluate one named formula and wrap the result for reporting."""
    def band():
        return FairnessBand(kw.get("delta_lo", 1.0) or 1.0, kw["delta_hi"])

    if formula == "single":
        algo = parse_algorithm(kw["algo"])
        bdp = kw.get("bdp", 1.0)
        value = single_flow_min_buffer(algo, bdp, kw.get("gamma", 1.0))
        inputs = {"algo": algo.name, "bdp": bdp, "gamma": kw.get("gamma", 1.0)}
        if algo.name == "md":
            inputs["beta"] = algo.beta
        return BoundReport(formula, value, inputs)
    if formula == "sqrt-n":
        b = band()
        return BoundReport(formula, sqrt_n_buffer(b, kw["bdp"], kw["n"]),
                           {"delta_hi": b.delta_hi, "bdp": kw["bdp"], "n": kw["n"]})
    if formula == "util-floor":
        b = band()
        return BoundReport(formula, utilization_floor(b, kw["n"]),
                           {"delta_hi": b.delta_hi, "n": kw["n"]})
    if formula == "bbr":
        b = band()
        return BoundReport(formula, bbr_buffer(b, kw["bdp"], kw["n"], kw["delta"]),
                           {"delta_hi": b.delta_hi, "bdp": kw["bdp"], "n": kw["n"],
                            "delta": kw["delta"]})
    if formula == "desync":
        b = band()
        value = desync_window_floor(b, kw["bdp"], kw["buffer"], kw["n"], kw["s"])
        return BoundReport(formula, value, {"delta_hi": b.delta_hi, "bdp": kw["bdp"],
                                            "buffer": kw["buffer"], "n": kw["n"], "s": kw["s"]})
    if formula == "min-decreasing":
        return BoundReport(formula, min_decreasing_flows(kw["n"], kw["w_min"]),
                           {"n": kw["n"], "w_min": kw["w_min"]})
    if formula == "bernoulli-tail":
        lo = kw.get("delta_lo", 1.0)
        b = FairnessBand(lo, max(lo, kw.get("delta_hi") or lo))
        threshold, prob = bernoulli_sync_tail(b, kw["bdp"], kw["n"], kw.get("delta"))
        return BoundReport(formula, threshold, {"delta_lo": lo, "bdp": kw["bdp"], "n": kw["n"],
                                                "delta": kw.get("delta")},
                           {"probability": prob})
    if formula == "random-loss":
        b = band()
        value = random_loss_buffer(b, kw["bdp"], kw["p"], kw["n"], kw["delta"])
        return BoundReport(formula, value, {"delta_hi": b.delta_hi, "bdp": kw["bdp"],
                                            "p": kw["p"], "n": kw["n"], "delta": kw["delta"]})
    if formula == "thm2":
        b = band()
        floor, cap = theorem2_window_floor(b, kw["bdp"], kw["buffer"], kw["n"])
        return BoundReport(formula, floor, {"delta_hi": b.delta_hi, "bdp": kw["bdp"],
                                            "buffer": kw["buffer"], "n": kw["n"]},
                           {"cap": cap})
    raise ValueError(f"unknown formula {formula!r}; expected one of {', '.join(FORMULAS)}")


__all__ = [
    "FairnessBand", "BoundReport", "single_flow_min_buffer", "single_flow_utilization",
    "zero_buffer_utilization", "sqrt_n_buffer", "utilization_floor", "bbr_buffer",
    "desync_window_floor", "min_decreasing_flows", "bernoulli_sync_tail",
    "random_loss_buffer", "theorem2_cap", "theorem2_window_floor", "compute", "FORMULAS",
    "AlgorithmKind",
]
