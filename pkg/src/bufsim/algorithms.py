"""Per-flow congestion window rules.

Every algorithm is reduced to what happens once per RTT: an increase when
the flow saw no congestion signal, and a reaction when it did.  BBR is
modelled only in its bandwidth-probing phase, as an eight-slot pacing gain
cycle around a base rate ``R`` (given in packets per RTT).

BBR in-flight bookkeeping: a slot paced at gain ``g`` changes the flow's
in-flight data by ``(g - 1) * R``, because the bottleneck drains exactly
``R`` worth of that flow's packets per RTT.  Over a full cycle the gains sum
to 8, so the in-flight level is unchanged unless packets were dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

GAIN_CYCLE = (1.25, 0.75, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
PROBE_PHASE = 0  # index of the 5/4 slot
DRAIN_PHASE = 1  # index of the 3/4 slot
# Appendix-style start positions: anywhere except the 3/4 slot.
START_PHASES = tuple(i for i in range(len(GAIN_CYCLE)) if i != DRAIN_PHASE)

CUBIC_BETA = 717 / 1024
SCALABLE_BETA = 7 / 8
SCALABLE_GROWTH = 1.01

# Kernel dispatch codes, shared with the compiled and numpy kernels.
KIND_ADDITIVE = 0
KIND_SCALABLE = 1
KIND_RANDOMIZED_RENO = 2
KIND_BBR_CYCLE = 3
KIND_BBR_INCREMENT = 4

_MD_NAMES = ("reno", "md", "cubic", "scalable")
NAMES = ("reno", "md", "cubic", "scalable", "bbr_cycle", "bbr_increment",
         "randomized_reno")


@dataclass(frozen=True)
class AlgorithmKind:
    """A congestion control algorithm and its decrease factor.

    ``beta`` is the fraction of the window kept after a congestion signal.
    It is ``None`` for the BBR kinds, which do not decrease multiplicatively.
    """

    name: str
    beta: float | None = None

    def __post_init__(self):
        if self.name not in NAMES:
            raise ValueError(f"unknown algorithm {self.name!r}; expected one of {', '.join(NAMES)}")
        if self.name == "md":
            if self.beta is None or not 0 < self.beta < 1:
                raise ValueError(f"md requires beta in (0, 1), got {self.beta}")
        elif self.beta is not None and self.beta != _default_beta(self.name):
            raise ValueError(f"{self.name} has a fixed beta; got {self.beta}")
        if self.beta is None and self.name != "md":
            object.__setattr__(self, "beta", _default_beta(self.name))

    @classmethod
    def reno(cls):
        return cls("reno")

    @classmethod
    def md(cls, beta: float):
        return cls("md", beta)

    @classmethod
    def cubic(cls):
        return cls("cubic")

    @classmethod
    def scalable(cls):
        return cls("scalable")

    @classmethod
    def bbr_cycle(cls):
        return cls("bbr_cycle")

    @classmethod
    def bbr_increment(cls):
        return cls("bbr_increment")

    @classmethod
    def randomized_reno(cls):
        return cls("randomized_reno")

    @property
    def is_bbr(self) -> bool:
        return self.name.startswith("bbr")

    @property
    def is_multiplicative(self) -> bool:
        return self.name in _MD_NAMES

    @property
    def kernel_code(self) -> int:
        return {
            "reno": KIND_ADDITIVE,
            "md": KIND_ADDITIVE,
            "cubic": KIND_ADDITIVE,
            "scalable": KIND_SCALABLE,
            "randomized_reno": KIND_RANDOMIZED_RENO,
            "bbr_cycle": KIND_BBR_CYCLE,
            "bbr_increment": KIND_BBR_INCREMENT,
        }[self.name]

    def to_dict(self) -> dict:
        if self.name == "md":
            return {"name": "md", "beta": self.beta}
        return {"name": self.name}


def _default_beta(name: str) -> float | None:
    return {
        "reno": 0.5,
        "cubic": CUBIC_BETA,
        "scalable": SCALABLE_BETA,
        "randomized_reno": 0.5,
    }.get(name)


@dataclass(frozen=True)
class FlowState:
    window: float
    algorithm: AlgorithmKind
    bbr_phase: int = 0
    bbr_base_rate: float = 0.0

    @property
    def gain(self) -> float:
        return GAIN_CYCLE[self.bbr_phase]


def increase(flow: FlowState) -> FlowState:
    """Window after one RTT with no congestion signal."""
    algo = flow.algorithm
    if algo.is_bbr:
        return flow
    if algo.name == "scalable":
        return replace(flow, window=flow.window * SCALABLE_GROWTH)
    return replace(flow, window=flow.window + 1.0)


def decrease(flow: FlowState, rng: np.random.Generator | None = None) -> FlowState:
    """Reaction of a flow that received a congestion signal this slot.

    Randomized Reno halves with probability ``1 / window``, using the window
    held when the signal arrives.  A BBR cycle flow only reacts in its 5/4
    slot, by moving to the 3/4 slot; an increment-model BBR flow draws its
    rate change.  Both random kinds need ``rng``.
    """
    algo = flow.algorithm
    if algo.name in ("randomized_reno", "bbr_increment") and rng is None:
        raise ValueError(f"{algo.name} needs an rng to react to congestion")
    if algo.is_multiplicative:
        return replace(flow, window=flow.window * algo.beta)
    if algo.name == "randomized_reno":
        if rng.random() < 1.0 / flow.window:
            return replace(flow, window=flow.window * 0.5)
        return flow
    if algo.name == "bbr_cycle":
        if flow.bbr_phase != PROBE_PHASE:
            return flow
        return advance_bbr(flow, saw_loss=True)
    return advance_bbr(flow, saw_loss=True, rng=rng)


def bbr_increment(base_rate, u):
    """Map uniforms ``u`` in [0, 1) to BBR rate changes.

    A flow caught in its 5/4 slot drops by ``base/4`` (probability 1/8), one
    in the slot before it rises by ``base/4`` (probability 1/8), the rest stay.
    Works elementwise on arrays.
    """
    quarter = 0.25 * np.asarray(base_rate, dtype=float)
    u = np.asarray(u, dtype=float)
    return np.where(u < 0.125, -quarter, np.where(u < 0.25, quarter, 0.0))


def advance_bbr(flow: FlowState, saw_loss: bool,
                rng: np.random.Generator | None = None) -> FlowState:
    """Move a BBR flow forward one slot."""
    algo = flow.algorithm
    if not algo.is_bbr:
        raise ValueError(f"advance_bbr needs a BBR flow, got {algo.name}")
    if algo.name == "bbr_increment":
        if not saw_loss:
            return flow
        if rng is None:
            raise ValueError("bbr_increment needs an rng")
        delta = float(bbr_increment(flow.bbr_base_rate, rng.random()))
        return replace(flow, window=flow.window + delta)
    # The 3/4 slot always follows the 5/4 slot, so a loss seen while probing
    # lands on the same next phase as the plain cycle; afterwards the flow
    # carries on through the gain-1 slots.
    phase = (flow.bbr_phase + 1) % len(GAIN_CYCLE)
    window = flow.window + (GAIN_CYCLE[phase] - 1.0) * flow.bbr_base_rate
    return replace(flow, window=window, bbr_phase=phase)


def exact_beta(algo: AlgorithmKind) -> Fraction:
    """Decrease factor as an exact fraction, for the closed-form bounds."""
    if algo.name == "cubic":
        return Fraction(717, 1024)
    if algo.name == "scalable":
        return Fraction(7, 8)
    if algo.name in ("reno", "randomized_reno"):
        return Fraction(1, 2)
    if algo.name == "md":
        return Fraction(algo.beta).limit_denominator(1 << 30)
    raise ValueError(f"{algo.name} has no multiplicative decrease factor")


def parse_algorithm(spec) -> AlgorithmKind:
    """Build an :class:`AlgorithmKind` from a name or ``{"name", "beta"}`` dict."""
    if isinstance(spec, AlgorithmKind):
        return spec
    if isinstance(spec, str):
        name = spec.lower().replace("-", "_")
        if name == "bbr":
            name = "bbr_cycle"
        return AlgorithmKind(name)
    if isinstance(spec, dict):
        name = str(spec.get("name", "")).lower().replace("-", "_")
        beta = spec.get("beta")
        return AlgorithmKind(name, None if beta is None else float(beta))
    raise ValueError(f"cannot interpret algorithm {spec!r}")
