"""Fluid-model laws for a single drop-tail bottleneck.

Time is measured in RTT slots, so link capacity is given directly in
packets per RTT and the bandwidth-delay product equals the capacity.
A flow's sending rate is ``window / RTT``; with RTT = 1 it is just the
window, so it is never stored separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LinkConfig:
    """Bottleneck link: capacity (packets per RTT) and buffer size (packets)."""

    capacity: float
    buffer: float
    rtt_slots: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.capacity) and math.isfinite(self.buffer)):
            raise ValueError("link capacity and buffer must be finite")
        if self.capacity <= 0:
            raise ValueError(f"bdp must be positive, got {self.capacity}")
        if self.buffer < 0:
            raise ValueError(f"buffer must be non-negative, got {self.buffer}")
        if self.rtt_slots != 1:
            raise ValueError("the slotted model uses exactly one slot per RTT")

    @property
    def bdp(self) -> float:
        return self.capacity

    @classmethod
    def from_bdp(cls, bdp: float, buffer: float) -> "LinkConfig":
        return cls(capacity=float(bdp), buffer=float(buffer))


@dataclass(frozen=True)
class AggregateState:
    inflight: float
    queue: float
    utilization: float


def _check_inflight(inflight: float) -> None:
    if inflight < 0 or math.isnan(inflight):
        raise ValueError(f"in-flight packet count must be >= 0, got {inflight}")


def queue_occupancy(inflight: float, link: LinkConfig) -> float:
    """Standing queue implied by ``inflight`` packets on ``link``."""
    _check_inflight(inflight)
    if inflight <= link.bdp:
        return 0.0
    if inflight < link.bdp + link.buffer:
        return inflight - link.bdp
    return float(link.buffer)


def loss_predicate(inflight: float, link: LinkConfig) -> bool:
    """True iff the queue is full, i.e. ``inflight >= bdp + buffer``."""
    _check_inflight(inflight)
    return inflight >= link.bdp + link.buffer


def utilization(inflight: float, link: LinkConfig) -> float:
    _check_inflight(inflight)
    return min(inflight / link.bdp, 1.0)


def aggregate_state(inflight: float, link: LinkConfig) -> AggregateState:
    return AggregateState(
        inflight=float(inflight),
        queue=queue_occupancy(inflight, link),
        utilization=utilization(inflight, link),
    )


def queue_occupancy_array(inflight, link: LinkConfig):
    """Vectorized :func:`queue_occupancy`; same branch values elementwise."""
    w = np.asarray(inflight, dtype=float)
    return np.clip(w - link.bdp, 0.0, float(link.buffer))


def utilization_array(inflight, link: LinkConfig):
    w = np.asarray(inflight, dtype=float)
    return np.minimum(w / link.bdp, 1.0)
