"""Fully associative on-chip buffer simulation over access traces."""

from __future__ import annotations

import heapq
import logging
from collections import OrderedDict
from dataclasses import asdict, dataclass
from typing import Tuple

import numpy as np

from .. import constants
from .trace import AccessTrace, SimulatorConfigError

logger = logging.getLogger(__name__)

POLICIES = (constants.POLICY_LRU, constants.POLICY_BELADY)


@dataclass
class CacheReport:
    policy: str
    capacity_lines: int
    accesses: int
    misses: int
    unique_lines: int

    @property
    def hits(self) -> int:
        return self.accesses - self.misses

    @property
    def miss_rate(self) -> float:
        return self.misses / self.accesses if self.accesses else 0.0

    def as_dict(self) -> dict:
        row = asdict(self)
        row["miss_rate"] = self.miss_rate
        return row


def line_accesses(trace: AccessTrace, line_bytes: int) -> Tuple[np.ndarray, np.ndarray]:
    """Expand events into the line ids they touch, with the source event index of each."""
    if line_bytes <= 0:
        raise SimulatorConfigError(f"line size must be positive, got {line_bytes}")
    first = trace.address // line_bytes
    last = (trace.address + np.maximum(trace.size, 1) - 1) // line_bytes
    spans = last - first + 1
    events = np.repeat(np.arange(len(trace)), spans)
    starts = np.repeat(np.cumsum(spans) - spans, spans)
    lines = np.repeat(first, spans) + (np.arange(int(spans.sum())) - starts)
    return lines.astype(np.int64), events


def _miss_mask(lines: np.ndarray, capacity_lines: int, policy: str) -> np.ndarray:
    n = len(lines)
    miss = np.zeros(n, dtype=bool)
    if n == 0:
        return miss
    # An immediate re-access always hits; simulate the compressed stream
    keep = np.ones(n, dtype=bool)
    keep[1:] = lines[1:] != lines[:-1]
    idx = np.flatnonzero(keep)
    seq = lines[idx]
    if policy == constants.POLICY_LRU:
        flags = _lru(seq, capacity_lines)
    else:
        flags = _belady(seq, capacity_lines)
    miss[idx] = flags
    return miss


def _lru(seq: np.ndarray, capacity: int) -> np.ndarray:
    cache: "OrderedDict[int, None]" = OrderedDict()
    miss = np.zeros(len(seq), dtype=bool)
    for i, line in enumerate(seq.tolist()):
        if line in cache:
            cache.move_to_end(line)
            continue
        miss[i] = True
        if len(cache) >= capacity:
            cache.popitem(last=False)
        cache[line] = None
    return miss


def _next_use(seq: np.ndarray) -> np.ndarray:
    n = len(seq)
    order = np.lexsort((np.arange(n), seq))
    nxt = np.full(n, n, dtype=np.int64)
    same = seq[order[1:]] == seq[order[:-1]]
    nxt[order[:-1][same]] = order[1:][same]
    return nxt


def _belady(seq: np.ndarray, capacity: int) -> np.ndarray:
    nxt = _next_use(seq).tolist()
    resident = {}
    heap = []
    miss = np.zeros(len(seq), dtype=bool)
    for i, line in enumerate(seq.tolist()):
        if line not in resident:
            miss[i] = True
            if len(resident) >= capacity:
                while True:
                    neg_use, victim = heapq.heappop(heap)
                    if resident.get(victim) == -neg_use:
                        del resident[victim]
                        break
        resident[line] = nxt[i]
        heapq.heappush(heap, (-nxt[i], line))
    return miss


def _check(capacity_bytes: int, line_bytes: int, policy: str) -> int:
    if policy not in POLICIES:
        raise SimulatorConfigError(f"unknown cache policy {policy!r}, expected one of {POLICIES}")
    if line_bytes <= 0:
        raise SimulatorConfigError(f"line size must be positive, got {line_bytes}")
    capacity_lines = capacity_bytes // line_bytes
    if capacity_lines < 1:
        raise SimulatorConfigError(f"capacity {capacity_bytes} holds no {line_bytes}-byte line")
    return capacity_lines


def simulate_cache(
    trace: AccessTrace, capacity_bytes: int, line_bytes: int = 64, policy: str = constants.POLICY_LRU
) -> CacheReport:
    capacity_lines = _check(capacity_bytes, line_bytes, policy)
    lines, _ = line_accesses(trace, line_bytes)
    miss = _miss_mask(lines, capacity_lines, policy)
    report = CacheReport(
        policy=policy,
        capacity_lines=capacity_lines,
        accesses=len(lines),
        misses=int(miss.sum()),
        unique_lines=int(len(np.unique(lines))),
    )
    logger.debug("%s cache: %d/%d misses", policy, report.misses, report.accesses)
    return report


def filter_misses(
    trace: AccessTrace, capacity_bytes: int, line_bytes: int = 64, policy: str = constants.POLICY_LRU
) -> AccessTrace:
    """The line fills a buffer in front of DRAM would issue for `trace`."""
    capacity_lines = _check(capacity_bytes, line_bytes, policy)
    lines, events = line_accesses(trace, line_bytes)
    miss = _miss_mask(lines, capacity_lines, policy)
    src = events[miss]
    return AccessTrace.from_columns(
        trace.level[src],
        trace.kind[src],
        lines[miss] * line_bytes,
        np.full(len(src), line_bytes, dtype=np.int64),
    )
