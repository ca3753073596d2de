"""Memory-system models: streaming traces, caches, SRAM banks, the Gathering Unit and energy."""

from ..config import EnergyModel, GuConfig
from .banks import BankConflictReport, BankLayout, random_schedule, simulate_bank_conflicts
from .cache import CacheReport, filter_misses, simulate_cache
from .energy import EnergyReport, EnergySavings, RemoteCost, attribute_savings, energy_report, remote_model
from .gu import GuReport, gu_cycles, mac_cycles, simulate_gu, simulate_gu_stepped, tile_cycles
from .rit import RayIndexTable, RitEntry, build_rit
from .streaming import StreamingReport, classify_trace, stream_tags
from .trace import (
    AccessTrace,
    MemoryCentricResult,
    SimulatorConfigError,
    render_memory_centric,
    trace_pixel_centric,
)
from .variants import FrameCosts, VariantRow, frame_costs, measure_frame_costs, model_variants

__all__ = [
    "AccessTrace",
    "BankConflictReport",
    "BankLayout",
    "CacheReport",
    "EnergyModel",
    "EnergyReport",
    "EnergySavings",
    "FrameCosts",
    "GuConfig",
    "GuReport",
    "MemoryCentricResult",
    "RayIndexTable",
    "RemoteCost",
    "RitEntry",
    "SimulatorConfigError",
    "StreamingReport",
    "VariantRow",
    "attribute_savings",
    "build_rit",
    "classify_trace",
    "energy_report",
    "filter_misses",
    "frame_costs",
    "gu_cycles",
    "mac_cycles",
    "measure_frame_costs",
    "model_variants",
    "random_schedule",
    "remote_model",
    "render_memory_centric",
    "simulate_bank_conflicts",
    "simulate_cache",
    "simulate_gu",
    "simulate_gu_stepped",
    "stream_tags",
    "tile_cycles",
    "trace_pixel_centric",
]
