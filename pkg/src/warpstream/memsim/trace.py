"""
Access traces and the two trace generators: pixel-centric gathering and
memory-centric (fully streaming) rendering.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from .. import constants
from ..config import RenderConfig
from ..geometry import CameraIntrinsics, Pose, generate_rays
from ..logging_utils import log_structured
from ..renderer.pipeline import Frame, RenderStats, composite_batch, decode_batch, finish_pixels
from ..renderer.sampling import sample_distances, sample_positions
from ..scene.grid import Scene, interpolate, trilinear_weights
from ..scene.mvoxel import MVoxelGrid
from .rit import RayIndexTable, build_rit

logger = logging.getLogger(__name__)


class SimulatorConfigError(Exception):
    pass


class AccessTrace:
    """Ordered access events held as parallel columns.

    Events are appended in batches and frozen into arrays on first read.
    """

    def __init__(self) -> None:
        self._chunks: List[Tuple[np.ndarray, ...]] = []
        self._frozen: Optional[Tuple[np.ndarray, ...]] = None

    def append(self, level: int, kind: int, address, size) -> None:
        address = np.atleast_1d(np.asarray(address, dtype=np.int64))
        size = np.broadcast_to(np.asarray(size, dtype=np.int64), address.shape)
        n = len(address)
        if n == 0:
            return
        self._flush_frozen()
        self._chunks.append(
            (
                np.full(n, level, dtype=np.int8),
                np.full(n, kind, dtype=np.int8),
                address.copy(),
                size.copy(),
                np.full(n, constants.TAG_UNCLASSIFIED, dtype=np.int8),
            )
        )

    def _flush_frozen(self) -> None:
        if self._frozen is not None:
            self._chunks = [self._frozen]
            self._frozen = None

    def _columns(self) -> Tuple[np.ndarray, ...]:
        if self._frozen is None:
            if self._chunks:
                self._frozen = tuple(np.concatenate(parts) for parts in zip(*self._chunks))
            else:
                self._frozen = (
                    np.zeros(0, np.int8),
                    np.zeros(0, np.int8),
                    np.zeros(0, np.int64),
                    np.zeros(0, np.int64),
                    np.zeros(0, np.int8),
                )
            self._chunks = []
        return self._frozen

    @classmethod
    def from_columns(cls, level, kind, address, size, tag=None) -> "AccessTrace":
        trace = cls()
        n = len(address)
        trace._frozen = (
            np.asarray(level, dtype=np.int8).reshape(n),
            np.asarray(kind, dtype=np.int8).reshape(n),
            np.asarray(address, dtype=np.int64).reshape(n),
            np.asarray(size, dtype=np.int64).reshape(n),
            np.full(n, constants.TAG_UNCLASSIFIED, dtype=np.int8) if tag is None else np.asarray(tag, dtype=np.int8),
        )
        return trace

    @property
    def level(self) -> np.ndarray:
        return self._columns()[0]

    @property
    def kind(self) -> np.ndarray:
        return self._columns()[1]

    @property
    def address(self) -> np.ndarray:
        return self._columns()[2]

    @property
    def size(self) -> np.ndarray:
        return self._columns()[3]

    @property
    def tag(self) -> np.ndarray:
        return self._columns()[4]

    def set_tags(self, tags: np.ndarray) -> None:
        level, kind, address, size, _ = self._columns()
        self._frozen = (level, kind, address, size, np.asarray(tags, dtype=np.int8))

    def __len__(self) -> int:
        return len(self.address)

    def mask(self, level: Optional[int] = None, kind: Optional[int] = None) -> np.ndarray:
        keep = np.ones(len(self), dtype=bool)
        if level is not None:
            keep &= self.level == level
        if kind is not None:
            keep &= self.kind == kind
        return keep

    def select(self, level: Optional[int] = None, kind: Optional[int] = None) -> "AccessTrace":
        keep = self.mask(level, kind)
        return AccessTrace.from_columns(
            self.level[keep], self.kind[keep], self.address[keep], self.size[keep], self.tag[keep]
        )

    def concat(self, other: "AccessTrace") -> "AccessTrace":
        return AccessTrace.from_columns(
            np.concatenate([self.level, other.level]),
            np.concatenate([self.kind, other.kind]),
            np.concatenate([self.address, other.address]),
            np.concatenate([self.size, other.size]),
            np.concatenate([self.tag, other.tag]),
        )

    @property
    def bytes_total(self) -> int:
        return int(self.size.sum())

    def within(self, limit: int) -> bool:
        return bool(np.all(self.address >= 0) and np.all(self.address + self.size <= limit))

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "seq": np.arange(len(self), dtype=np.int64),
                "level": pd.Series(self.level).map(constants.LEVEL_NAMES),
                "kind": pd.Series(self.kind).map(constants.KIND_NAMES),
                "address": self.address,
                "size": self.size,
                "tag": pd.Series(self.tag).map(constants.TAG_NAMES),
            }
        )

    def to_csv(self, path: Path) -> None:
        self.to_dataframe().to_csv(Path(path), index=False)


def frame_rays(pose: Pose, intr: CameraIntrinsics) -> Tuple[np.ndarray, np.ndarray]:
    return generate_rays(intr, pose, intr.pixel_centers())


def _inside_samples(scene: Scene, origins: np.ndarray, dirs: np.ndarray, cfg: RenderConfig):
    t, delta = sample_distances(cfg.near, cfg.far, cfg.n_samples)
    positions = sample_positions(origins, dirs, t).reshape(-1, 3)
    inside = np.flatnonzero(scene.grid.contains(positions))
    return t, delta, positions, inside


def trace_pixel_centric(
    scene: Scene, mgrid: MVoxelGrid, origins: np.ndarray, dirs: np.ndarray, cfg: RenderConfig
) -> AccessTrace:
    """DRAM feature reads as a pixel-centric gather issues them.

    Rays in order, samples in order along each ray, eight whole-vertex reads
    per in-box sample in corner order. The decoder weights are read once
    ahead of the first gather.
    """
    trace = AccessTrace()
    _, _, positions, inside = _inside_samples(scene, origins, dirs, cfg)
    if len(inside) == 0:
        return trace
    cells, _ = scene.grid.locate(positions[inside])
    vids = scene.grid.corner_vertex_ids(cells)
    trace.append(constants.LEVEL_DRAM, constants.KIND_WEIGHTS, mgrid.weights_base, scene.mlp.nbytes)
    trace.append(
        constants.LEVEL_DRAM,
        constants.KIND_FEATURE,
        mgrid.vertex_read_address(vids.reshape(-1)),
        mgrid.vertex_bytes,
    )
    return trace


@dataclass(eq=False)
class MemoryCentricResult:
    frame: Frame
    trace: AccessTrace
    rit: RayIndexTable
    address_map: Dict[str, Tuple[int, int]]
    fetched: List[int] = field(default_factory=list)

    @property
    def address_limit(self) -> int:
        return max(end for _, end in self.address_map.values())


def render_memory_centric(
    scene: Scene, mgrid: MVoxelGrid, pose: Pose, intr: CameraIntrinsics, cfg: RenderConfig
) -> MemoryCentricResult:
    """Render a frame by streaming MVoxels in address order.

    Phase one visits each MVoxel with a non-empty RIT list once, in
    ascending address order, and decodes its samples into per-ray buffers.
    Phase two composites every ray in sample order, so the frame equals
    render_frame bit for bit.
    """
    origins, dirs = frame_rays(pose, intr)
    rays = len(origins)
    t, delta, positions, inside = _inside_samples(scene, origins, dirs, cfg)
    samples = cfg.n_samples
    ray_ids = inside // samples
    sample_index = inside % samples
    cells, frac = scene.grid.locate(positions[inside])
    rit = build_rit(ray_ids, sample_index, cells, frac, mgrid)

    sigma = np.zeros(rays * samples, dtype=np.float32)
    rgb = np.zeros((rays * samples, 3), dtype=np.float32)
    channels = scene.mlp.active_channels
    rit_base = mgrid.rit_base(scene.mlp.nbytes)

    trace = AccessTrace()
    if len(rit):
        trace.append(constants.LEVEL_DRAM, constants.KIND_WEIGHTS, mgrid.weights_base, scene.mlp.nbytes)
    fetched = []
    for m in rit.nonempty():
        lo, hi = rit.bounds(m)
        trace.append(
            constants.LEVEL_DRAM,
            constants.KIND_RIT,
            rit_base + lo * constants.RIT_ENTRY_BYTES,
            (hi - lo) * constants.RIT_ENTRY_BYTES,
        )
        trace.append(constants.LEVEL_DRAM, constants.KIND_FEATURE, mgrid.address(m), mgrid.block_bytes)
        fetched.append(int(m))

        block = mgrid.block_table(m, channels)
        slots = mgrid.local_slots(rit.cells[lo:hi], m)
        feats = interpolate(block, slots, trilinear_weights(rit.frac[lo:hi]))
        flat = rit.ray_ids[lo:hi] * samples + rit.sample_index[lo:hi]
        sigma[flat], rgb[flat] = decode_batch(feats, scene.mlp)
        trace.append(
            constants.LEVEL_SRAM,
            constants.KIND_FEATURE,
            slots.reshape(-1) * mgrid.vertex_bytes,
            mgrid.vertex_bytes,
        )

    color, ray_depth, opacity = composite_batch(
        sigma.reshape(rays, samples), rgb.reshape(rays, samples, 3), t, delta, cfg.tau
    )
    color, depth = finish_pixels(color, ray_depth, opacity, dirs, pose, cfg)
    stats = RenderStats(
        rays=rays,
        samples_indexed=rays * samples,
        samples_gathered=len(inside),
        vertex_reads=8 * len(inside),
        mlp_evals=len(inside),
    )
    frame = Frame(
        color=color.reshape(intr.height, intr.width, 3),
        depth=depth.reshape(intr.height, intr.width),
        opacity=opacity.reshape(intr.height, intr.width),
        pose=pose,
        intr=intr,
        stats=stats,
    )
    result = MemoryCentricResult(
        frame=frame,
        trace=trace,
        rit=rit,
        address_map=mgrid.address_map(scene.mlp.nbytes, rit.nbytes),
        fetched=fetched,
    )
    log_structured(
        logger,
        "Rendered memory-centric frame",
        {
            constants.LOG_KEY_EVENT: constants.EVENT_MEMSIM,
            constants.LOG_KEY_MVOXELS: len(fetched),
            constants.LOG_KEY_SAMPLES: len(rit),
        },
        level=logging.DEBUG,
    )
    return result
