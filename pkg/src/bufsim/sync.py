"""Synchronization models: which flows see a congestion signal.

When the queue fills, a sync model decides the set ``D(t)`` of flows that
receive the signal.  Every random model works off one uniform draw per
flow: flows are ranked by their draw and ``D(t)`` is a prefix of that
ranking.  The simulator kernels use the same construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels

SYNC_NAMES = ("minimal", "sqrt_extra", "fully_synchronized", "bernoulli",
              "largest_first", "ecn_threshold")

_CODES = {
    "minimal": kernels.SYNC_MINIMAL,
    "sqrt_extra": kernels.SYNC_SQRT_EXTRA,
    "fully_synchronized": kernels.SYNC_FULL,
    "bernoulli": kernels.SYNC_BERNOULLI,
    "largest_first": kernels.SYNC_LARGEST_FIRST,
    "ecn_threshold": kernels.SYNC_ECN,
}


@dataclass(frozen=True)
class SyncModel:
    """Congestion-signal allocation policy.

    * ``minimal``: the fewest uniformly chosen flows whose halving stops the
      aggregate window from growing.
    * ``sqrt_extra``: ``minimal`` plus ``ceil(sqrt(n))`` more random flows.
    * ``fully_synchronized``: every flow.
    * ``bernoulli``: each flow independently with probability ``p``.
    * ``largest_first``: the ``k`` largest windows.
    * ``ecn_threshold``: marks a random ``ceil(mark_fraction * n)`` flows
      whenever the queue reaches ``threshold`` packets.
    """

    name: str
    p: float | None = None
    k: int | None = None
    threshold: float | None = None
    mark_fraction: float | None = None

    def __post_init__(self):
        if self.name not in SYNC_NAMES:
            raise ValueError(f"unknown sync model {self.name!r}; expected one of {', '.join(SYNC_NAMES)}")
        if self.name == "bernoulli":
            if self.p is None or not 0.0 <= self.p <= 1.0:
                raise ValueError(f"bernoulli needs p in [0, 1], got {self.p}")
        if self.name == "largest_first":
            if self.k is None or int(self.k) != self.k or self.k < 0:
                raise ValueError(f"largest_first needs a count k >= 0, got {self.k}")
        if self.name == "ecn_threshold":
            if self.threshold is None or self.threshold < 0:
                raise ValueError(f"ecn_threshold needs threshold >= 0, got {self.threshold}")
            frac = 1.0 if self.mark_fraction is None else self.mark_fraction
            if not 0.0 < frac <= 1.0:
                raise ValueError(f"mark_fraction must lie in (0, 1], got {frac}")
            object.__setattr__(self, "mark_fraction", float(frac))

    @classmethod
    def minimal(cls):
        return cls("minimal")

    @classmethod
    def sqrt_extra(cls):
        return cls("sqrt_extra")

    @classmethod
    def fully_synchronized(cls):
        return cls("fully_synchronized")

    @classmethod
    def bernoulli(cls, p: float):
        return cls("bernoulli", p=float(p))

    @classmethod
    def largest_first(cls, k: int):
        return cls("largest_first", k=int(k))

    @classmethod
    def ecn_threshold(cls, threshold: float, mark_fraction: float = 1.0):
        return cls("ecn_threshold", threshold=float(threshold), mark_fraction=float(mark_fraction))

    @property
    def code(self) -> int:
        return _CODES[self.name]

    def fixed_count(self, n: int) -> int:
        """Signal count for the count-based models (``largest_first``, ``ecn_threshold``)."""
        if self.name == "largest_first":
            return min(int(self.k), n)
        if self.name == "ecn_threshold":
            return min(n, math.ceil(self.mark_fraction * n - 1e-12))
        return 0

    def to_dict(self) -> dict:
        out = {"name": self.name}
        for key in ("p", "k", "threshold", "mark_fraction"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out


def extra_flows(n: int) -> int:
    """``ceil(sqrt(n))`` computed exactly."""
    r = math.isqrt(n)
    return r if r * r == n else r + 1


def parse_sync(spec) -> SyncModel:
    if isinstance(spec, SyncModel):
        return spec
    if isinstance(spec, str):
        return SyncModel(spec.lower().replace("-", "_"))
    if isinstance(spec, dict):
        fields = {k: spec[k] for k in ("p", "k", "threshold", "mark_fraction") if k in spec}
        return SyncModel(str(spec.get("name", "")).lower().replace("-", "_"), **fields)
    raise ValueError(f"cannot interpret sync model {spec!r}")


def selection_order(sync: SyncModel, windows, u) -> np.ndarray:
    """Ranking of flows from which ``D(t)`` is taken as a prefix."""
    if sync.name == "largest_first":
        return np.argsort(-np.asarray(windows, dtype=float), kind="stable")
    return np.argsort(np.asarray(u, dtype=float), kind="stable")


def allocate_congestion(sync: SyncModel, windows, rng: np.random.Generator | None = None,
                        u=None, cap: int | None = None) -> np.ndarray:
    """Indices of the flows that see the congestion signal, in selection order.

    Either ``rng`` or the per-flow uniforms ``u`` must be given for the
    random models.  ``cap`` truncates the set (theorem mode).
    """
    windows = np.ascontiguousarray(windows, dtype=float)
    n = windows.shape[0]
    if n == 0:
        raise ValueError("cannot allocate congestion among zero flows")
    if u is None:
        if rng is None:
            if sync.name not in ("fully_synchronized", "largest_first"):
                raise ValueError(f"{sync.name} needs an rng or uniforms")
            u = np.zeros(n)
        else:
            u = rng.random(n)
    u = np.asarray(u, dtype=float)
    order = selection_order(sync, windows, u)
    if sync.name == "minimal":
        size = kernels.minimal_prefix(windows, order)
    elif sync.name == "sqrt_extra":
        size = min(n, kernels.minimal_prefix(windows, order) + extra_flows(n))
    elif sync.name == "fully_synchronized":
        size = n
    elif sync.name == "bernoulli":
        size = int(np.count_nonzero(u < sync.p))
    else:
        size = sync.fixed_count(n)
    if cap is not None:
        size = min(size, int(cap))
    return order[:size]
