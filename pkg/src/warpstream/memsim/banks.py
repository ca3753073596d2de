"""
SRAM bank layouts and a per-cycle bank-conflict simulator.

A gather schedule is an int array (batches, lanes): the vertex each lane
needs in that batch, -1 for an idle lane. In feature-major layout a lane
reads its whole vector from the vertex's home bank in one request. In
channel-major layout lane k reads channels k, k + lanes, k + 2 * lanes, ...
of every lane's vertex in turn; with lanes equal to banks lane k is pinned
to bank k, and no two lanes ever share a bank in one cycle.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Tuple

import numpy as np

from .. import constants
from .trace import SimulatorConfigError

logger = logging.getLogger(__name__)

LAYOUTS = (constants.LAYOUT_FEATURE_MAJOR, constants.LAYOUT_CHANNEL_MAJOR)


@dataclass(frozen=True)
class BankLayout:
    mode: str
    banks: int
    bank_words: int
    channels: int

    def __post_init__(self) -> None:
        if self.mode not in LAYOUTS:
            raise SimulatorConfigError(f"unknown bank layout {self.mode!r}, expected one of {LAYOUTS}")
        if self.banks < 1 or self.bank_words < 1 or self.channels < 1:
            raise SimulatorConfigError("banks, bank words and channels must all be positive")

    @classmethod
    def from_bytes(cls, mode: str, banks: int, bank_bytes: int, channels: int) -> "BankLayout":
        return cls(mode, banks, bank_bytes // constants.FP16_BYTES, channels)

    @property
    def passes(self) -> int:
        """Channel groups a channel-major gather walks per vertex."""
        return -(-self.channels // self.banks)

    @property
    def capacity_vertices(self) -> int:
        if self.mode == constants.LAYOUT_FEATURE_MAJOR:
            return (self.bank_words // self.channels) * self.banks
        return self.bank_words // self.passes

    def map(self, vertex: np.ndarray, channel: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(bank, row) of each (vertex offset, channel) word."""
        vertex = np.asarray(vertex, dtype=np.int64)
        channel = np.asarray(channel, dtype=np.int64)
        if np.any(channel < 0) or np.any(channel >= self.channels):
            raise IndexError(f"channel out of range 0..{self.channels - 1}")
        if np.any(vertex < 0) or np.any(vertex >= self.capacity_vertices):
            raise IndexError(f"vertex out of range 0..{self.capacity_vertices - 1}")
        if self.mode == constants.LAYOUT_FEATURE_MAJOR:
            return vertex % self.banks, (vertex // self.banks) * self.channels + channel
        return channel % self.banks, vertex * self.passes + channel // self.banks


@dataclass
class BankConflictReport:
    layout: str
    lanes: int
    ports: int
    batches: int
    requests: int
    conflicting_requests: int
    stall_cycles: int
    cycles: int

    @property
    def conflict_rate(self) -> float:
        return self.conflicting_requests / self.requests if self.requests else 0.0

    def as_dict(self) -> dict:
        row = asdict(self)
        row["conflict_rate"] = self.conflict_rate
        return row


def random_schedule(batches: int, lanes: int, vertices: int, seed: int = 0) -> np.ndarray:
    """Uniform-random vertex requests, one per lane per batch."""
    rng = np.random.default_rng(seed)
    return rng.integers(0, vertices, size=(batches, lanes), dtype=np.int64)


def _bank_counts(banks_per_request: np.ndarray, n_banks: int) -> np.ndarray:
    """(cycles, n_banks) request counts from (cycles, k) bank ids, -1 ignored."""
    cycles = banks_per_request.shape[0]
    counts = np.zeros((cycles, n_banks), dtype=np.int64)
    rows, cols = np.nonzero(banks_per_request >= 0)
    np.add.at(counts, (rows, banks_per_request[rows, cols]), 1)
    return counts


def simulate_bank_conflicts(schedule: np.ndarray, layout: BankLayout, ports: int = 1) -> BankConflictReport:
    schedule = np.atleast_2d(np.asarray(schedule, dtype=np.int64))
    batches, lanes = schedule.shape
    if ports < 1:
        raise SimulatorConfigError(f"ports per bank must be positive, got {ports}")

    if layout.mode == constants.LAYOUT_FEATURE_MAJOR:
        requested = np.where(schedule >= 0, schedule % layout.banks, -1)
    else:
        if lanes > layout.banks:
            raise SimulatorConfigError(f"{lanes} lanes exceed {layout.banks} banks in channel-major layout")
        # One cycle per (batch, source lane, channel group); lane k reads
        # channel g * lanes + k, so a cycle touches `lanes` consecutive banks
        groups = -(-layout.channels // lanes)
        active = np.repeat(schedule.reshape(-1) >= 0, groups)
        group = np.tile(np.arange(groups), batches * lanes)
        channel = group[:, None] * lanes + np.arange(lanes)[None, :]
        valid = active[:, None] & (channel < layout.channels)
        requested = np.where(valid, channel % layout.banks, -1)

    counts = _bank_counts(requested, layout.banks)
    conflicts = int(np.maximum(counts - ports, 0).sum())
    per_cycle = -(-counts // ports)
    stalls = int(np.maximum(per_cycle.max(axis=1, initial=0) - 1, 0).sum()) if len(counts) else 0
    report = BankConflictReport(
        layout=layout.mode,
        lanes=lanes,
        ports=ports,
        batches=batches,
        requests=int((requested >= 0).sum()),
        conflicting_requests=conflicts,
        stall_cycles=stalls,
        cycles=len(requested) + stalls,
    )
    logger.debug("%s banks: conflict rate %.4f over %d requests", layout.mode, report.conflict_rate, report.requests)
    return report
