"""Ray Index Table: in-box ray samples grouped by the MVoxel that holds their features."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterator, Tuple

import numpy as np

from .. import constants
from ..scene.grid import trilinear_weights
from ..scene.mvoxel import MVoxelGrid

_ENTRY_FORMAT = "<8I8e"


@dataclass(frozen=True)
class RitEntry:
    ray_id: int
    sample_index: int
    vids: Tuple[int, ...]
    weights: Tuple[float, ...]

    def to_bytes(self) -> bytes:
        """Serialized record: eight uint32 vertex ids then eight fp16 weights."""
        return struct.pack(_ENTRY_FORMAT, *self.vids, *self.weights)

    @classmethod
    def from_bytes(cls, payload: bytes, ray_id: int = -1, sample_index: int = -1) -> "RitEntry":
        values = struct.unpack(_ENTRY_FORMAT, payload)
        return cls(ray_id, sample_index, tuple(values[:8]), tuple(values[8:]))


@dataclass(eq=False)
class RayIndexTable:
    """Columnar RIT sorted by (mvoxel, ray_id, sample_index).

    offsets[m]:offsets[m + 1] is MVoxel m's entry list.
    """

    mgrid: MVoxelGrid
    offsets: np.ndarray
    ray_ids: np.ndarray
    sample_index: np.ndarray
    cells: np.ndarray
    frac: np.ndarray

    def __len__(self) -> int:
        return int(len(self.ray_ids))

    @property
    def nbytes(self) -> int:
        return len(self) * constants.RIT_ENTRY_BYTES

    def counts(self) -> np.ndarray:
        return np.diff(self.offsets)

    def bounds(self, mvoxel: int) -> Tuple[int, int]:
        return int(self.offsets[mvoxel]), int(self.offsets[mvoxel + 1])

    def nonempty(self) -> np.ndarray:
        return np.flatnonzero(self.counts() > 0)

    def sample_ids(self) -> np.ndarray:
        """(N, 2) (ray_id, sample_index) pairs in table order."""
        return np.stack([self.ray_ids, self.sample_index], axis=1)

    def entries(self, mvoxel: int) -> Iterator[RitEntry]:
        lo, hi = self.bounds(mvoxel)
        if hi == lo:
            return
        vids = self.mgrid.parent.corner_vertex_ids(self.cells[lo:hi])
        weights = trilinear_weights(self.frac[lo:hi]).astype(np.float16)
        for i in range(hi - lo):
            yield RitEntry(
                int(self.ray_ids[lo + i]),
                int(self.sample_index[lo + i]),
                tuple(int(v) for v in vids[i]),
                tuple(float(w) for w in weights[i]),
            )

    def serialize(self) -> bytes:
        """The RIT stream as laid out in DRAM, MVoxel lists back to back."""
        return b"".join(entry.to_bytes() for m in self.nonempty() for entry in self.entries(int(m)))


def build_rit(
    ray_ids: np.ndarray,
    sample_index: np.ndarray,
    cells: np.ndarray,
    frac: np.ndarray,
    mgrid: MVoxelGrid,
) -> RayIndexTable:
    """Group in-box samples by the MVoxel owning their cell's minimum corner."""
    ray_ids = np.asarray(ray_ids, dtype=np.int64)
    sample_index = np.asarray(sample_index, dtype=np.int64)
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, 3)
    frac = np.asarray(frac, dtype=np.float32).reshape(-1, 3)
    mvoxels = mgrid.mvoxel_of_cells(cells)
    order = np.lexsort((sample_index, ray_ids, mvoxels))
    counts = np.bincount(mvoxels, minlength=mgrid.num_mvoxels)
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return RayIndexTable(
        mgrid=mgrid,
        offsets=offsets,
        ray_ids=ray_ids[order],
        sample_index=sample_index[order],
        cells=cells[order],
        frac=frac[order],
    )
