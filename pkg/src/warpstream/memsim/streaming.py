"""Streaming / random classification of access traces."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Tuple

import numpy as np

from .. import constants
from .trace import AccessTrace

logger = logging.getLogger(__name__)

DEFAULT_BURST_BYTES = 64
DEFAULT_PAGE_BYTES = 2048


@dataclass
class StreamingReport:
    events: int
    counted_events: int
    streaming_events: int
    streaming_fraction: float
    bytes_total: int
    unique_bytes: int
    redundancy_ratio: float
    streaming_bytes: int
    random_bytes: int

    def as_dict(self) -> dict:
        return asdict(self)


def _stream_tags(address: np.ndarray, size: np.ndarray, burst_bytes: int, page_bytes: int) -> np.ndarray:
    tags = np.empty(len(address), dtype=np.int8)
    if len(address) == 0:
        return tags
    prev_end = address[:-1] + size[:-1]
    start = address[1:]
    contiguous = start == prev_end
    same_burst = (start // burst_bytes) == ((prev_end - 1) // burst_bytes)
    forward_block = (size[1:] >= page_bytes) & (start >= prev_end)
    tags[1:] = np.where(contiguous | same_burst | forward_block, constants.TAG_STREAMING, constants.TAG_RANDOM)
    tags[0] = constants.TAG_STREAMING if size[0] >= page_bytes else constants.TAG_RANDOM
    return tags


def unique_bytes(address: np.ndarray, size: np.ndarray) -> int:
    """Size of the union of [address, address + size) intervals."""
    if len(address) == 0:
        return 0
    order = np.argsort(address, kind="stable")
    starts = address[order]
    ends = starts + size[order]
    reach = np.maximum.accumulate(ends)
    covered_until = np.concatenate([[starts[0]], reach[:-1]])
    return int(np.maximum(ends - np.maximum(starts, covered_until), 0).sum())


def stream_tags(
    trace: AccessTrace,
    burst_bytes: int = DEFAULT_BURST_BYTES,
    page_bytes: int = DEFAULT_PAGE_BYTES,
) -> Tuple[np.ndarray, np.ndarray]:
    """Streaming/random tag per event and the mask of events counted in the fraction.

    Each (level, kind) pair is its own stream. An event is streaming when
    it starts where the previous event of its stream ended, inside that
    event's final burst window, or when it is a forward transfer of at
    least one page. The first event of a stream is tagged by size alone
    and left out of the fraction. The trace is not modified.
    """
    n = len(trace)
    tags = np.empty(n, dtype=np.int8)
    counted = np.zeros(n, dtype=bool)
    for level in constants.LEVEL_NAMES:
        for kind in constants.KIND_NAMES:
            idx = np.flatnonzero(trace.mask(level, kind))
            if len(idx) == 0:
                continue
            tags[idx] = _stream_tags(trace.address[idx], trace.size[idx], burst_bytes, page_bytes)
            counted[idx[1:]] = True
    return tags, counted


def classify_trace(
    trace: AccessTrace,
    burst_bytes: int = DEFAULT_BURST_BYTES,
    page_bytes: int = DEFAULT_PAGE_BYTES,
) -> StreamingReport:
    """Tag every event of `trace` in place (see `stream_tags`) and summarise it."""
    n = len(trace)
    tags, counted = stream_tags(trace, burst_bytes, page_bytes)
    trace.set_tags(tags)

    streaming = tags == constants.TAG_STREAMING
    n_counted = int(counted.sum())
    n_streaming = int((streaming & counted).sum())
    total = trace.bytes_total
    unique = unique_bytes(trace.address, trace.size)
    report = StreamingReport(
        events=n,
        counted_events=n_counted,
        streaming_events=n_streaming,
        streaming_fraction=n_streaming / n_counted if n_counted else 1.0,
        bytes_total=total,
        unique_bytes=unique,
        redundancy_ratio=total / unique if unique else 1.0,
        streaming_bytes=int(trace.size[streaming].sum()),
        random_bytes=int(trace.size[~streaming].sum()),
    )
    logger.debug("Classified %d events: streaming fraction %.4f", n, report.streaming_fraction)
    return report
