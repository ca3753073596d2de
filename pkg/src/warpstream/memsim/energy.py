"""Per-byte energy accounting for classified traces and the wireless link."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from .. import constants
from ..config import EnergyModel
from .streaming import DEFAULT_BURST_BYTES, DEFAULT_PAGE_BYTES, stream_tags
from .trace import AccessTrace

logger = logging.getLogger(__name__)


@dataclass
class EnergyReport:
    dram_streaming_bytes: int
    dram_random_bytes: int
    sram_bytes: int
    dram_streaming_energy: float
    dram_random_energy: float
    sram_energy: float
    cycles: int = 0

    @property
    def dram_bytes(self) -> int:
        return self.dram_streaming_bytes + self.dram_random_bytes

    @property
    def dram_energy(self) -> float:
        return self.dram_streaming_energy + self.dram_random_energy

    @property
    def total(self) -> float:
        return self.dram_energy + self.sram_energy

    def as_dict(self) -> dict:
        row = asdict(self)
        row.update(dram_energy=self.dram_energy, total_energy=self.total)
        return row


@dataclass
class EnergySavings:
    """Baseline minus improved energy, split by cause; the parts sum to total."""

    total: float
    traffic_reduction: float
    streaming_conversion: float
    sram_delta: float

    @property
    def traffic_share(self) -> float:
        dram = self.traffic_reduction + self.streaming_conversion
        return self.traffic_reduction / dram if dram else 0.0

    def as_dict(self) -> dict:
        row = asdict(self)
        row["traffic_share"] = self.traffic_share
        return row


@dataclass
class RemoteCost:
    tx_latency_s: float
    tx_energy_j: float


def energy_report(
    trace: AccessTrace,
    cycles: int,
    em: EnergyModel,
    burst_bytes: int = DEFAULT_BURST_BYTES,
    page_bytes: int = DEFAULT_PAGE_BYTES,
) -> EnergyReport:
    """Energy of a trace priced event by event from its tags.

    Events still unclassified are tagged on a copy; `trace` is left as is.
    For fully tagged traces the result is additive: pricing two traces and
    pricing them joined end to end give the same bytes and energy.
    """
    tags = trace.tag
    untagged = tags == constants.TAG_UNCLASSIFIED
    if np.any(untagged):
        tags = np.where(untagged, stream_tags(trace, burst_bytes, page_bytes)[0], tags)
    dram = trace.level == constants.LEVEL_DRAM
    streaming = tags == constants.TAG_STREAMING
    stream_bytes = int(trace.size[dram & streaming].sum())
    random_bytes = int(trace.size[dram & ~streaming].sum())
    sram_bytes = int(trace.size[~dram].sum())
    return EnergyReport(
        dram_streaming_bytes=stream_bytes,
        dram_random_bytes=random_bytes,
        sram_bytes=sram_bytes,
        dram_streaming_energy=stream_bytes * em.e_dram_stream,
        dram_random_energy=random_bytes * em.e_dram_random,
        sram_energy=sram_bytes * em.e_sram,
        cycles=int(cycles),
    )


def attribute_savings(baseline: EnergyReport, improved: EnergyReport) -> EnergySavings:
    """Split the saving into fewer DRAM bytes at the baseline's average cost,
    cheaper bytes (random turned streaming), and the SRAM difference."""
    per_byte = baseline.dram_energy / baseline.dram_bytes if baseline.dram_bytes else 0.0
    traffic = baseline.dram_energy - improved.dram_bytes * per_byte
    conversion = (baseline.dram_energy - improved.dram_energy) - traffic
    sram = baseline.sram_energy - improved.sram_energy
    return EnergySavings(
        total=baseline.total - improved.total,
        traffic_reduction=traffic,
        streaming_conversion=conversion,
        sram_delta=sram,
    )


def remote_model(ref_bytes: int, em: EnergyModel) -> RemoteCost:
    """Wireless transfer of one reference frame."""
    return RemoteCost(
        tx_latency_s=ref_bytes / em.wireless_bytes_per_s,
        tx_energy_j=ref_bytes * em.wireless_nj_per_byte / 1e9,
    )
