"""
MVoxel partitioning: the vertex lattice cut into cubes that each fit the
on-chip vertex feature buffer, laid out contiguously in DRAM.

Each MVoxel owns mshape^3 vertices. Its DRAM block is the owned region
(channel-major) followed by a replica of the one-vertex halo on its high
faces (channel-major), so every cell whose minimum corner the MVoxel owns
can be interpolated from a single block fetch. Vertices past the grid edge
are zero padding that still occupies address space.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Sequence, Tuple

import numpy as np

from .. import constants
from ..logging_utils import log_structured
from .errors import SceneConfigError
from .grid import CORNER_OFFSETS, FeatureGrid

logger = logging.getLogger(__name__)

DEFAULT_MSHAPE = 8
REGION_ALIGN = 64


def _align(value: int, alignment: int = REGION_ALIGN) -> int:
    return -(-value // alignment) * alignment


@dataclass(frozen=True, eq=False)
class MVoxelGrid:
    parent: FeatureGrid
    mshape: int
    dram_base: int = 0

    @property
    def channels(self) -> int:
        return self.parent.channels

    @cached_property
    def mdims(self) -> Tuple[int, int, int]:
        return tuple(-(-n // self.mshape) for n in self.parent.dims)  # type: ignore[return-value]

    @property
    def num_mvoxels(self) -> int:
        mx, my, mz = self.mdims
        return mx * my * mz

    @property
    def owned_vertices(self) -> int:
        return self.mshape**3

    @property
    def halo_vertices(self) -> int:
        return (self.mshape + 1) ** 3 - self.mshape**3

    @property
    def slots(self) -> int:
        return (self.mshape + 1) ** 3

    @property
    def owned_bytes(self) -> int:
        return self.owned_vertices * self.channels * constants.FP16_BYTES

    @property
    def halo_bytes(self) -> int:
        return self.halo_vertices * self.channels * constants.FP16_BYTES

    @property
    def block_bytes(self) -> int:
        return self.owned_bytes + self.halo_bytes

    @property
    def vertex_bytes(self) -> int:
        return self.channels * constants.FP16_BYTES

    @property
    def feature_end(self) -> int:
        return self.dram_base + self.num_mvoxels * self.block_bytes

    @property
    def weights_base(self) -> int:
        return _align(self.feature_end)

    def rit_base(self, weight_bytes: int) -> int:
        return _align(self.weights_base + weight_bytes)

    def address_map(self, weight_bytes: int, rit_bytes: int) -> Dict[str, Tuple[int, int]]:
        rit_base = self.rit_base(weight_bytes)
        return {
            "features": (self.dram_base, self.feature_end),
            "weights": (self.weights_base, self.weights_base + weight_bytes),
            "rit": (rit_base, rit_base + rit_bytes),
        }

    def address(self, mvoxel: int) -> int:
        if not 0 <= mvoxel < self.num_mvoxels:
            raise IndexError(f"MVoxel {mvoxel} out of range 0..{self.num_mvoxels - 1}")
        return self.dram_base + mvoxel * self.block_bytes

    def mvoxel_linear(self, mcoords: np.ndarray) -> np.ndarray:
        _, my, mz = self.mdims
        mcoords = np.asarray(mcoords, dtype=np.int64)
        return (mcoords[..., 0] * my + mcoords[..., 1]) * mz + mcoords[..., 2]

    def mvoxel_coords(self, mvoxel: np.ndarray) -> np.ndarray:
        _, my, mz = self.mdims
        mvoxel = np.asarray(mvoxel, dtype=np.int64)
        return np.stack([mvoxel // (my * mz), (mvoxel // mz) % my, mvoxel % mz], axis=-1)

    def vertex_to_mvoxel(self, vid: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(owning MVoxel id, owned-region offset) for each vertex id."""
        coords = self.parent.vertex_coords(vid)
        mcoords = coords // self.mshape
        local = coords - mcoords * self.mshape
        offset = (local[..., 0] * self.mshape + local[..., 1]) * self.mshape + local[..., 2]
        return self.mvoxel_linear(mcoords), offset

    def mvoxel_to_vertex(self, mvoxel: np.ndarray, offset: np.ndarray) -> np.ndarray:
        """Inverse of vertex_to_mvoxel; padding positions map to -1."""
        ms = self.mshape
        offset = np.asarray(offset, dtype=np.int64)
        local = np.stack([offset // (ms * ms), (offset // ms) % ms, offset % ms], axis=-1)
        coords = self.mvoxel_coords(mvoxel) * ms + local
        inside = np.all(coords < np.asarray(self.parent.dims), axis=-1)
        return np.where(inside, self.parent.linear_vertex_ids(np.minimum(coords, np.asarray(self.parent.dims) - 1)), -1)

    def mvoxel_of_cells(self, cells: np.ndarray) -> np.ndarray:
        """Owning MVoxel of each cell's minimum-corner vertex."""
        return self.mvoxel_linear(np.asarray(cells, dtype=np.int64) // self.mshape)

    @cached_property
    def slot_position(self) -> np.ndarray:
        """Position of each extended-cube vertex in block order (owned first, then halo)."""
        ext = self.mshape + 1
        lx, ly, lz = np.meshgrid(np.arange(ext), np.arange(ext), np.arange(ext), indexing="ij")
        is_halo = ((lx == self.mshape) | (ly == self.mshape) | (lz == self.mshape)).ravel()
        positions = np.empty(ext**3, dtype=np.int64)
        positions[~is_halo] = np.arange(self.owned_vertices)
        positions[is_halo] = self.owned_vertices + np.arange(self.halo_vertices)
        return positions

    def local_slots(self, cells: np.ndarray, mvoxel: int) -> np.ndarray:
        """(N, 8) block positions of the corners of cells owned by `mvoxel`."""
        ext = self.mshape + 1
        origin = self.mvoxel_coords(mvoxel) * self.mshape
        local = np.asarray(cells, dtype=np.int64)[:, None, :] - origin + CORNER_OFFSETS[None, :, :]
        flat = (local[..., 0] * ext + local[..., 1]) * ext + local[..., 2]
        return self.slot_position[flat]

    def block_vertex_ids(self, mvoxel: int) -> np.ndarray:
        """Global vertex id held at each block position, -1 for padding."""
        ext = self.mshape + 1
        lx, ly, lz = np.meshgrid(np.arange(ext), np.arange(ext), np.arange(ext), indexing="ij")
        coords = np.stack([lx.ravel(), ly.ravel(), lz.ravel()], axis=1) + self.mvoxel_coords(mvoxel) * self.mshape
        dims = np.asarray(self.parent.dims)
        inside = np.all(coords < dims, axis=1)
        vids = np.full(ext**3, -1, dtype=np.int64)
        vids[inside] = self.parent.linear_vertex_ids(coords[inside])
        ordered = np.empty_like(vids)
        ordered[self.slot_position] = vids
        return ordered

    def block_table(self, mvoxel: int, channels: Sequence[int]) -> np.ndarray:
        """(slots, len(channels)) float32 resident copy of one MVoxel block."""
        vids = self.block_vertex_ids(mvoxel)
        table = np.zeros((len(vids), len(channels)), dtype=np.float32)
        present = vids >= 0
        table[present] = self.parent.channel_table(channels)[vids[present]]
        return table

    def block_payload(self, mvoxel: int) -> bytes:
        """The block as it sits in DRAM: owned then halo, each channel-major fp16."""
        vids = self.block_vertex_ids(mvoxel)
        values = np.zeros((len(vids), self.channels), dtype=np.float16)
        present = vids >= 0
        values[present] = self.parent.features.reshape(-1, self.channels)[vids[present]]
        owned = values[: self.owned_vertices].T
        halo = values[self.owned_vertices :].T
        return owned.astype("<f2").tobytes() + halo.astype("<f2").tobytes()

    def feature_address(self, mvoxel: int, position: np.ndarray, channel: np.ndarray) -> np.ndarray:
        """DRAM byte address of (block position, channel) inside an MVoxel block."""
        position = np.asarray(position, dtype=np.int64)
        channel = np.asarray(channel, dtype=np.int64)
        base = self.address(mvoxel)
        owned = base + (channel * self.owned_vertices + position) * constants.FP16_BYTES
        halo = (
            base
            + self.owned_bytes
            + (channel * self.halo_vertices + (position - self.owned_vertices)) * constants.FP16_BYTES
        )
        return np.where(position < self.owned_vertices, owned, halo)

    def vertex_read_address(self, vid: np.ndarray) -> np.ndarray:
        """Address of a whole-vertex read, as a pixel-centric gather issues it."""
        mvoxel, offset = self.vertex_to_mvoxel(vid)
        return self.dram_base + mvoxel * self.block_bytes + offset * self.vertex_bytes


def partition_mvoxels(
    grid: FeatureGrid,
    buffer_bytes: int,
    mshape: int = DEFAULT_MSHAPE,
    dram_base: int = 0,
    halo_in_buffer: bool = False,
) -> MVoxelGrid:
    """Tile the grid with the largest cubic MVoxel (up to `mshape`) that fits `buffer_bytes`.

    By default only the owned vertices must fit and the halo replica is held
    next to the buffer. With `halo_in_buffer` the whole block, halo
    included, must fit.
    """
    vertex_bytes = grid.channels * constants.FP16_BYTES

    def needed(shape: int) -> int:
        vertices = (shape + 1) ** 3 if halo_in_buffer else shape**3
        return vertices * vertex_bytes

    shape = mshape
    while shape >= 2 and needed(shape) > buffer_bytes:
        shape -= 1
    if shape < 2:
        what = "a 2x2x2 block plus halo" if halo_in_buffer else "a 2x2x2 block"
        raise SceneConfigError(
            f"buffer of {buffer_bytes} bytes cannot hold {what} of {grid.channels}-channel vertices"
        )
    if shape != mshape:
        logger.warning("MVoxel shape shrunk from %d to %d to fit a %d-byte buffer", mshape, shape, buffer_bytes)
    mgrid = MVoxelGrid(grid, shape, dram_base)
    if mgrid.block_bytes > buffer_bytes:
        log_structured(
            logger,
            "MVoxel block with halo exceeds the feature buffer",
            {
                "MSHAPE": shape,
                "BLOCK_BYTES": mgrid.block_bytes,
                "HALO_BYTES": mgrid.halo_bytes,
                "BUFFER_BYTES": buffer_bytes,
            },
            level=logging.WARNING,
        )
    log_structured(
        logger,
        "Partitioned grid into MVoxels",
        {
            constants.LOG_KEY_MVOXELS: mgrid.num_mvoxels,
            "MSHAPE": shape,
            "BLOCK_BYTES": mgrid.block_bytes,
            "HALO_BYTES": mgrid.halo_bytes,
        },
        level=logging.DEBUG,
    )
    return mgrid
