"""
Gathering Unit cycle model.

Each non-empty MVoxel costs a block load (block bytes over the DRAM bus)
and a gather of 8 vertex reads per sample, M samples at a time, once per
group of B channels. Two block buffers let the load of MVoxel i+1 overlap
the gather of MVoxel i.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence, Tuple

from ..config import GuConfig
from ..scene.mlp import MlpWeights
from .rit import RayIndexTable
from .trace import SimulatorConfigError

logger = logging.getLogger(__name__)

VERTEX_READS_PER_SAMPLE = 8
BLOCK_BUFFERS = 2


@dataclass
class GuReport:
    mvoxels: int
    samples: int
    gather_cycles: int
    mvoxel_load_cycles: int
    total_cycles: int
    rit_buffer_loads: int

    def as_dict(self) -> dict:
        return asdict(self)


def check_gu_config(gcfg: GuConfig) -> None:
    for name in ("banks", "ports", "mac_rows", "mac_cols", "rit_entries_per_buffer", "bus_bytes_per_cycle"):
        if getattr(gcfg, name) < 1:
            raise SimulatorConfigError(f"GU {name} must be positive, got {getattr(gcfg, name)}")
    if gcfg.banks * gcfg.bank_bytes != gcfg.vft_bytes:
        raise SimulatorConfigError(
            f"{gcfg.banks} banks of {gcfg.bank_bytes} bytes do not make a {gcfg.vft_bytes}-byte VFT"
        )


def compute_cycles(samples: int, channels: int, gcfg: GuConfig) -> int:
    if samples <= 0:
        return 0
    passes = -(-channels // gcfg.banks)
    return VERTEX_READS_PER_SAMPLE * -(-samples // gcfg.ports) * passes


def load_cycles(block_bytes: int, gcfg: GuConfig) -> int:
    return -(-block_bytes // gcfg.bus_bytes_per_cycle)


def _phases(counts: Iterable[int], block_bytes: int, channels: int, gcfg: GuConfig) -> Tuple[list, list]:
    counts = [int(s) for s in counts if s > 0]
    loads = [load_cycles(block_bytes, gcfg)] * len(counts)
    computes = [compute_cycles(s, channels, gcfg) for s in counts]
    return loads, computes


def gu_cycles(counts: Sequence[int], block_bytes: int, channels: int, gcfg: GuConfig) -> GuReport:
    """Closed-form double-buffered schedule over per-MVoxel sample counts."""
    check_gu_config(gcfg)
    loads, computes = _phases(counts, block_bytes, channels, gcfg)
    total = 0
    if loads:
        total = loads[0]
        for i, c in enumerate(computes):
            following = loads[i + 1] if i + 1 < len(loads) else 0
            total += max(c, following)
    nonempty = [int(s) for s in counts if s > 0]
    return GuReport(
        mvoxels=len(nonempty),
        samples=sum(nonempty),
        gather_cycles=sum(computes),
        mvoxel_load_cycles=sum(loads),
        total_cycles=total,
        rit_buffer_loads=sum(-(-s // gcfg.rit_entries_per_buffer) for s in nonempty),
    )


def simulate_gu(rit: RayIndexTable, gcfg: GuConfig) -> GuReport:
    if rit.mgrid.owned_bytes > gcfg.vft_bytes:
        raise SimulatorConfigError(
            f"MVoxel of {rit.mgrid.owned_bytes} bytes does not fit a {gcfg.vft_bytes}-byte VFT"
        )
    report = gu_cycles(rit.counts(), rit.mgrid.block_bytes, rit.mgrid.channels, gcfg)
    logger.debug("GU: %d MVoxels, %d cycles", report.mvoxels, report.total_cycles)
    return report


def simulate_gu_stepped(counts: Sequence[int], block_bytes: int, channels: int, gcfg: GuConfig) -> int:
    """Cycle-by-cycle reference for gu_cycles' total.

    Per cycle: a ready block starts gathering if the gather ports are idle,
    then the loader starts the next block if it is idle and a buffer is
    free, then every port retires one vertex read and the loader one cycle.
    """
    check_gu_config(gcfg)
    passes = -(-channels // gcfg.banks)
    to_load = deque(int(s) for s in counts if s > 0)
    ready: deque = deque()
    load_left = 0
    loading = None
    reads_left: list = []
    buffers = 0
    cycle = 0
    while to_load or ready or loading is not None or reads_left:
        if not reads_left and ready:
            reads_left = [VERTEX_READS_PER_SAMPLE * passes] * ready.popleft()
        if loading is None and to_load and buffers < BLOCK_BUFFERS:
            loading = to_load.popleft()
            load_left = load_cycles(block_bytes, gcfg)
            buffers += 1

        if reads_left:
            for port in range(min(gcfg.ports, len(reads_left))):
                reads_left[port] -= 1
            while reads_left and reads_left[0] == 0:
                reads_left.pop(0)
            if not reads_left:
                buffers -= 1
        if loading is not None:
            load_left -= 1
            if load_left == 0:
                ready.append(loading)
                loading = None
        cycle += 1
    return cycle


def tile_cycles(layers: Iterable[Tuple[int, int]], samples: int, gcfg: GuConfig) -> int:
    """Weight-stationary tiling: every (rows x cols) tile of a layer streams all samples once."""
    if samples <= 0:
        return 0
    return sum(-(-d_in // gcfg.mac_rows) * -(-d_out // gcfg.mac_cols) * samples for d_in, d_out in layers)


def mac_cycles(samples: int, mlp: MlpWeights, gcfg: GuConfig) -> int:
    return tile_cycles(mlp.layer_dims(), samples, gcfg)
