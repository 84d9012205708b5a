"""Slotted simulation and closed-form bounds for router buffer sizing."""

__version__ = "0.1.0"

from .algorithms import AlgorithmKind, FlowState, parse_algorithm
from .bounds import BoundReport, FairnessBand
from .engine import SimConfig, SimulationError, Simulator, SlotTelemetry, Trace, run
from .kernels import BACKEND
from .model import LinkConfig
from .sync import SyncModel, allocate_congestion

__all__ = [
    "AlgorithmKind", "BACKEND", "BoundReport", "FairnessBand", "FlowState", "LinkConfig",
    "SimConfig", "SimulationError", "Simulator", "SlotTelemetry", "SyncModel", "Trace",
    "allocate_congestion", "parse_algorithm", "run", "__version__",
]
