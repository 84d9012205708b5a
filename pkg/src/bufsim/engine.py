"""RTT-slotted multi-flow simulator.

Each slot does, in order:

1. aggregate window ``W``, queue ``Q`` and utilization from current windows;
2. the loss predicate (and the ECN mark predicate, if configured);
3. the sync model picks the flows ``D(t)`` that see the signal;
4. flows in ``D(t)`` react, all others increase (BBR flows step their cycle);
5. window floor, plus the fairness clamp in theorem mode;
6. telemetry for slot ``t`` is recorded.

Randomness: one PCG64 stream seeded from ``SimConfig.seed``.  Initial
conditions are drawn first, then every slot consumes exactly ``2n``
uniforms (a ranking draw and a reaction draw per flow) whether or not the
queue fills, so a run is reproducible slot by slot.

Theorem mode enforces the premises of the multi-flow window bounds: windows
of at least 2 packets, the fairness band given by ``fairness_clamp``, and at
most ``n**2 / (delta_hi * bdp) + sqrt(n)`` flows reacting per congestion
event.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .algorithms import (
    START_PHASES,
    AlgorithmKind,
    GAIN_CYCLE,
    parse_algorithm,
)
from .model import LinkConfig, queue_occupancy_array, utilization_array
from .sync import SyncModel, extra_flows, parse_sync

_BLOCK_VALUES = 1 << 20


class SimulationError(RuntimeError):
    def __init__(self, slot: int, message: str):
        super().__init__(f"slot {slot}: {message}")
        self.slot = slot


@dataclass(frozen=True)
class SimConfig:
    link: LinkConfig
    n_flows: int
    algorithm: AlgorithmKind
    sync: SyncModel = field(default_factory=SyncModel.minimal)
    duration: int = 1000
    seed: int = 0
    fairness_clamp: tuple[float, float] | None = None
    theorem_mode: bool = False
    record_flows: bool = False
    init_spread: float = 0.25

    def __post_init__(self):
        if int(self.n_flows) != self.n_flows or self.n_flows < 1:
            raise ValueError(f"n_flows must be an integer >= 1, got {self.n_flows}")
        if int(self.duration) != self.duration or self.duration < 1:
            raise ValueError(f"duration must be an integer >= 1, got {self.duration}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        object.__setattr__(self, "algorithm", parse_algorithm(self.algorithm))
        object.__setattr__(self, "sync", parse_sync(self.sync))
        if self.fairness_clamp is not None:
            lo, hi = (float(x) for x in self.fairness_clamp)
            if not 0 < lo <= hi:
                raise ValueError(f"fairness_clamp needs 0 < lo <= hi, got {self.fairness_clamp}")
            object.__setattr__(self, "fairness_clamp", (lo, hi))
        if self.sync.name == "ecn_threshold" and self.sync.threshold > self.link.buffer:
            raise ValueError(
                f"ecn threshold {self.sync.threshold} exceeds buffer {self.link.buffer}")
        if not 0 <= self.init_spread < 1:
            raise ValueError(f"init_spread must lie in [0, 1), got {self.init_spread}")

    @property
    def window_floor(self) -> float:
        return 2.0 if self.theorem_mode else 1.0

    @property
    def clamp_bounds(self) -> tuple[float, float]:
        """Enforced per-flow window range, in packets."""
        if self.theorem_mode and self.fairness_clamp is not None:
            share = self.link.bdp / self.n_flows
            return self.fairness_clamp[0] * share, self.fairness_clamp[1] * share
        return -math.inf, math.inf

    @property
    def decrease_cap(self) -> int:
        """Largest number of flows allowed to react in one slot."""
        n = self.n_flows
        if self.theorem_mode and self.fairness_clamp is not None:
            cap = n * n / (self.fairness_clamp[1] * self.link.bdp) + math.sqrt(n)
            return max(1, min(n, math.floor(cap + 1e-9)))
        return n

    def replace(self, **changes) -> "SimConfig":
        data = {f: getattr(self, f) for f in self.__dataclass_fields__}
        if "buffer" in changes or "bdp" in changes:
            link = LinkConfig.from_bdp(changes.pop("bdp", self.link.bdp),
                                       changes.pop("buffer", self.link.buffer))
            data["link"] = link
        data.update(changes)
        return SimConfig(**data)

    def to_dict(self) -> dict:
        return {
            "link": {"bdp": self.link.bdp, "buffer": self.link.buffer},
            "n_flows": self.n_flows,
            "algorithm": self.algorithm.to_dict(),
            "sync": self.sync.to_dict(),
            "duration": self.duration,
            "seed": self.seed,
            "fairness_clamp": None if self.fairness_clamp is None else list(self.fairness_clamp),
            "theorem_mode": self.theorem_mode,
            "record_flows": self.record_flows,
            "init_spread": self.init_spread,
        }


@dataclass(frozen=True)
class SlotTelemetry:
    slot: int
    aggregate_window: float
    queue: float
    utilization: float
    loss_event: bool
    marked: bool
    n_decreasing: int
    adjusted: int
    decreasing_flows: tuple[int, ...] | None = None
    per_flow_windows: tuple[float, ...] | None = None

    def as_dict(self):
        return asdict(self)


@dataclass
class Trace:
    """Per-slot telemetry of one run, stored column-wise."""

    config: SimConfig
    W: np.ndarray
    loss: np.ndarray
    marked: np.ndarray
    n_decreasing: np.ndarray
    w_min: np.ndarray
    w_max: np.ndarray
    d_min: np.ndarray
    adjusted: np.ndarray
    windows: np.ndarray | None = None
    decreasing: np.ndarray | None = None
    backend: str = kernels.BACKEND

    def __post_init__(self):
        self.Q = queue_occupancy_array(self.W, self.config.link)
        self.mu = utilization_array(self.W, self.config.link)

    def __len__(self):
        return self.W.shape[0]

    @property
    def signal(self) -> np.ndarray:
        """Slots where a loss or an ECN mark occurred."""
        return self.loss | self.marked

    def __getitem__(self, t: int) -> SlotTelemetry:
        t = range(len(self))[t]
        dec = flows = None
        if self.decreasing is not None:
            dec = tuple(int(i) for i in np.flatnonzero(self.decreasing[t]))
            flows = tuple(float(x) for x in self.windows[t])
        return SlotTelemetry(
            slot=t,
            aggregate_window=float(self.W[t]),
            queue=float(self.Q[t]),
            utilization=float(self.mu[t]),
            loss_event=bool(self.loss[t]),
            marked=bool(self.marked[t]),
            n_decreasing=int(self.n_decreasing[t]),
            adjusted=int(self.adjusted[t]),
            decreasing_flows=dec,
            per_flow_windows=flows,
        )

    def __iter__(self):
        for t in range(len(self)):
            yield self[t]


class Simulator:
    """Holds the evolving flow state for one configured run."""

    def __init__(self, config: SimConfig):
        self.config = config
        self.rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(config.seed)))
        self.slot = 0
        n = config.n_flows
        link = config.link
        algo = config.algorithm
        self.phase = np.zeros(n, dtype=np.int64)
        self.base = np.zeros(n, dtype=np.float64)

        if n == 1 or config.init_spread == 0:
            weights = np.ones(n)
        else:
            spread = config.init_spread
            weights = self.rng.uniform(1.0 - spread, 1.0 + spread, n)
            weights *= n / weights.sum()

        if algo.name == "bbr_cycle":
            self.base = link.bdp / n * weights
            self.phase = self.rng.choice(np.array(START_PHASES, dtype=np.int64), size=n)
            gains = np.array(GAIN_CYCLE)[self.phase]
            self.window = gains * self.base
        elif algo.name == "bbr_increment":
            self.base = link.bdp / n * weights
            self.window = (link.bdp + link.buffer) / n * weights
        else:
            self.window = (link.bdp + link.buffer) / n * weights
        lo, hi = config.clamp_bounds
        self.window = np.minimum(np.maximum(np.maximum(self.window, config.window_floor), lo), hi)
        self.window = np.ascontiguousarray(self.window, dtype=np.float64)
        self.phase = np.ascontiguousarray(self.phase, dtype=np.int64)
        self.base = np.ascontiguousarray(self.base, dtype=np.float64)

    def flow_states(self):
        from .algorithms import FlowState

        return [FlowState(float(w), self.config.algorithm, int(p), float(b))
                for w, p, b in zip(self.window, self.phase, self.base)]

    def _draw(self, slots: int):
        n = self.config.n_flows
        u = self.rng.random((slots, 2, n))
        return np.ascontiguousarray(u[:, 0, :]), np.ascontiguousarray(u[:, 1, :])

    def _advance(self, slots: int, out: dict, offset: int, impl=None):
        cfg = self.config
        impl = impl or kernels
        sel, react = self._draw(slots)
        lo, hi = cfg.clamp_bounds
        sync = cfg.sync
        impl.run_block(
            self.window, self.phase, self.base, sel, react,
            cfg.algorithm.kernel_code, float(cfg.algorithm.beta or 0.0),
            cfg.window_floor, lo, hi, cfg.link.bdp, cfg.link.buffer,
            sync.code, float(sync.p or 0.0), sync.fixed_count(cfg.n_flows),
            float(sync.threshold or 0.0), extra_flows(cfg.n_flows), cfg.decrease_cap,
            out["W"], out["loss"], out["marked"], out["n_decreasing"],
            out["w_min"], out["w_max"], out["d_min"], out["adjusted"],
            out["windows"], out["decreasing"], offset,
        )
        bad = ~np.isfinite(out["W"][offset:offset + slots])
        if bad.any():
            raise SimulationError(self.slot + int(np.argmax(bad)), "aggregate window is not finite")
        self.slot += slots

    def _buffers(self, slots: int, record: bool):
        n = self.config.n_flows
        rows = slots if record else 0
        return {
            "W": np.zeros(slots),
            "loss": np.zeros(slots, dtype=np.uint8),
            "marked": np.zeros(slots, dtype=np.uint8),
            "n_decreasing": np.zeros(slots, dtype=np.int64),
            "w_min": np.zeros(slots),
            "w_max": np.zeros(slots),
            "d_min": np.zeros(slots),
            "adjusted": np.zeros(slots, dtype=np.int64),
            "windows": np.zeros((rows, n)),
            "decreasing": np.zeros((rows, n), dtype=np.uint8),
        }

    def step(self) -> SlotTelemetry:
        """Advance one slot and return its telemetry."""
        out = self._buffers(1, True)
        t = self.slot
        self._advance(1, out, 0)
        return _restamp(self._trace(out, True, kernels.BACKEND)[0], t)

    def run(self, slots: int | None = None, impl=None) -> Trace:
        """Advance ``slots`` (default: the configured duration) and return the trace."""
        cfg = self.config
        slots = cfg.duration if slots is None else int(slots)
        if slots < 1:
            raise ValueError("a run needs at least one slot")
        out = self._buffers(slots, cfg.record_flows)
        block = max(1, _BLOCK_VALUES // (2 * cfg.n_flows))
        done = 0
        while done < slots:
            k = min(block, slots - done)
            self._advance(k, out, done, impl)
            done += k
        return self._trace(out, cfg.record_flows, (impl or kernels).BACKEND)

    def _trace(self, out, record, backend):
        return Trace(
            config=self.config,
            W=out["W"],
            loss=out["loss"].astype(bool),
            marked=out["marked"].astype(bool),
            n_decreasing=out["n_decreasing"],
            w_min=out["w_min"],
            w_max=out["w_max"],
            d_min=out["d_min"],
            adjusted=out["adjusted"],
            windows=out["windows"] if record else None,
            decreasing=out["decreasing"].astype(bool) if record else None,
            backend=backend,
        )


def _restamp(rec: SlotTelemetry, slot: int) -> SlotTelemetry:
    data = rec.as_dict()
    data["slot"] = slot
    return SlotTelemetry(**data)


def run(config: SimConfig, impl=None) -> Trace:
    """Simulate ``config.duration`` slots from a fresh state."""
    return Simulator(config).run(impl=impl)
