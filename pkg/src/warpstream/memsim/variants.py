"""
Modeled cycles and energy of the execution variants over a sequence.

Per-frame costs are measured once on a full frame through the memory
simulators; a sequence is then priced to first order: reference frames
pay a full-frame cost, target frames pay their sparse NeRF pixels at the
pixel-centric per-pixel cost plus a per-pixel warp. All numbers are
modeled, not measured, and reported relative to the baseline.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, List, Sequence

import numpy as np

from .. import constants
from ..config import EnergyModel, GuConfig, MemoryConfig, RenderConfig
from ..geometry import CameraIntrinsics, Pose
from ..logging_utils import log_structured
from ..scene.grid import Scene
from ..scene.mvoxel import MVoxelGrid
from .banks import BankLayout, simulate_bank_conflicts
from .energy import energy_report, remote_model
from .gu import mac_cycles, simulate_gu
from .trace import AccessTrace, MemoryCentricResult, frame_rays, render_memory_centric, trace_pixel_centric

logger = logging.getLogger(__name__)

VARIANT_BASELINE = "baseline"
VARIANT_SPARW = "sparw"
VARIANT_SPARW_FS = "sparw+fs"
VARIANT_FULL = "full"
VARIANTS = (VARIANT_BASELINE, VARIANT_SPARW, VARIANT_SPARW_FS, VARIANT_FULL)

SCENARIO_LOCAL = "local"
SCENARIO_REMOTE = "remote"
SCENARIOS = (SCENARIO_LOCAL, SCENARIO_REMOTE)


@dataclass
class Cost:
    cycles: float
    energy: float  # trace energy units

    def scaled(self, factor: float) -> "Cost":
        return Cost(self.cycles * factor, self.energy * factor)

    def __add__(self, other: "Cost") -> "Cost":
        return Cost(self.cycles + other.cycles, self.energy + other.energy)


@dataclass
class FrameCosts:
    """Full-frame costs of the three hardware data flows, plus one frame's warp."""

    pixels: int
    reference_bytes: int
    pixel_centric: Cost
    streaming: Cost
    full: Cost
    warp: Cost
    details: Dict[str, float]

    def reference_cost(self, variant: str) -> Cost:
        if variant == VARIANT_SPARW_FS:
            return self.streaming
        if variant == VARIANT_FULL:
            return self.full
        return self.pixel_centric


@dataclass
class VariantRow:
    scenario: str
    variant: str
    seconds: float
    energy_j: float
    speedup: float
    normalized_energy: float
    modeled: bool = True

    def as_dict(self) -> dict:
        return asdict(self)


def _gather_schedule(sram_addresses: np.ndarray, vertex_bytes: int, lanes: int) -> np.ndarray:
    vertices = sram_addresses // vertex_bytes
    batches = max(1, -(-len(vertices) // lanes))
    schedule = np.full(batches * lanes, -1, dtype=np.int64)
    schedule[: len(vertices)] = vertices
    return schedule.reshape(batches, lanes)


def measure_frame_costs(
    scene: Scene,
    mgrid: MVoxelGrid,
    pose: Pose,
    intr: CameraIntrinsics,
    cfg: RenderConfig,
    gcfg: GuConfig,
    mcfg: MemoryConfig,
    em: EnergyModel,
) -> FrameCosts:
    """Run both data flows on one frame and price each variant's full frame."""
    origins, dirs = frame_rays(pose, intr)
    pc_trace = trace_pixel_centric(scene, mgrid, origins, dirs, cfg)
    mc = render_memory_centric(scene, mgrid, pose, intr, cfg)
    return frame_costs(scene, mgrid, pc_trace, mc, gcfg, mcfg, em)


def frame_costs(
    scene: Scene,
    mgrid: MVoxelGrid,
    pc_trace: AccessTrace,
    mc: MemoryCentricResult,
    gcfg: GuConfig,
    mcfg: MemoryConfig,
    em: EnergyModel,
) -> FrameCosts:
    pc_energy = energy_report(pc_trace, 0, em, mcfg.burst_bytes, mcfg.page_bytes)
    mc_energy = energy_report(mc.trace, 0, em, mcfg.burst_bytes, mcfg.page_bytes)

    sram = mc.trace.select(level=constants.LEVEL_SRAM)
    schedule = _gather_schedule(sram.address, mgrid.vertex_bytes, mcfg.lanes)
    layout = BankLayout.from_bytes(constants.LAYOUT_FEATURE_MAJOR, gcfg.banks, gcfg.bank_bytes, mgrid.channels)
    banks = simulate_bank_conflicts(schedule, layout, gcfg.ports)
    per_batch = banks.cycles / banks.batches

    stats = mc.frame.stats
    gather_fm = math.ceil(stats.vertex_reads / mcfg.lanes) * per_batch
    dram_ratio = em.e_dram_random / em.e_dram_stream
    dram_pc = (pc_energy.dram_streaming_bytes + pc_energy.dram_random_bytes * dram_ratio) / gcfg.bus_bytes_per_cycle
    macs = mac_cycles(stats.mlp_evals, scene.mlp, gcfg)
    gu = simulate_gu(mc.rit, gcfg)

    pixels = mc.frame.intr.num_pixels
    reference_bytes = mc.frame.reference_bytes
    costs = FrameCosts(
        pixels=pixels,
        reference_bytes=reference_bytes,
        pixel_centric=Cost(max(gather_fm, dram_pc) + macs, pc_energy.total),
        streaming=Cost(max(gather_fm, gu.mvoxel_load_cycles) + macs, mc_energy.total),
        full=Cost(gu.total_cycles + macs, mc_energy.total),
        warp=Cost(math.ceil(pixels / mcfg.lanes), reference_bytes * em.e_sram),
        details={
            "feature_major_conflict_rate": banks.conflict_rate,
            "pixel_centric_dram_bytes": pc_energy.dram_bytes,
            "memory_centric_dram_bytes": mc_energy.dram_bytes,
            "gu_total_cycles": gu.total_cycles,
            "mac_cycles": macs,
        },
    )
    log_structured(
        logger,
        "Measured frame costs",
        {
            constants.LOG_KEY_EVENT: constants.EVENT_MEMSIM,
            constants.LOG_KEY_PIXELS: pixels,
            "PC_CYCLES": round(costs.pixel_centric.cycles),
            "FULL_CYCLES": round(costs.full.cycles),
        },
        level=logging.DEBUG,
    )
    return costs


def _target_cost(costs: FrameCosts, sparse_fraction: float) -> Cost:
    return costs.pixel_centric.scaled(sparse_fraction) + costs.warp


def model_variants(
    costs: FrameCosts,
    sparse_fractions: Sequence[float],
    references: int,
    gcfg: GuConfig,
    em: EnergyModel,
) -> List[VariantRow]:
    """Price a sequence of len(sparse_fractions) target frames under every variant and scenario.

    Local: the device renders references and targets back to back.
    Remote: references (or, for the baseline, every frame) are rendered
    off-device and shipped over the wireless link, concurrently with the
    local target work; the device pays only the link and its local work.
    """
    frames = len(sparse_fractions)
    link = remote_model(costs.reference_bytes, em)
    targets = Cost(0.0, 0.0)
    for fraction in sparse_fractions:
        targets = targets + _target_cost(costs, fraction)

    rows: List[VariantRow] = []
    for scenario in SCENARIOS:
        priced = {}
        for variant in VARIANTS:
            if variant == VARIANT_BASELINE:
                full_work = costs.pixel_centric.scaled(frames)
                local_work = Cost(0.0, 0.0)
                shipped = frames
            else:
                full_work = costs.reference_cost(variant).scaled(references)
                local_work = targets
                shipped = references
            if scenario == SCENARIO_LOCAL:
                work = full_work + local_work
                seconds = work.cycles / gcfg.clock_hz
                energy = work.energy * em.joules_per_unit
            else:
                remote_seconds = full_work.cycles / gcfg.clock_hz + shipped * link.tx_latency_s
                seconds = max(remote_seconds, local_work.cycles / gcfg.clock_hz)
                energy = local_work.energy * em.joules_per_unit + shipped * link.tx_energy_j
            priced[variant] = (seconds, energy)
        base_seconds, base_energy = priced[VARIANT_BASELINE]
        for variant in VARIANTS:
            seconds, energy = priced[variant]
            rows.append(
                VariantRow(
                    scenario=scenario,
                    variant=variant,
                    seconds=seconds,
                    energy_j=energy,
                    speedup=base_seconds / seconds if seconds else math.inf,
                    normalized_energy=energy / base_energy if base_energy else math.nan,
                )
            )
    return rows
