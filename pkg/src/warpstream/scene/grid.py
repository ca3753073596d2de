"""
Dense vertex-feature grid and the indexing math shared by every renderer.

Vertex (ix, iy, iz) has linear id (ix * Ny + iy) * Nz + iz. Features are
held at rest as float16 and promoted to float32 for compute.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import SceneConfigError
from .mlp import MlpWeights

logger = logging.getLogger(__name__)

# Corner k of a cell sits at offset ((k >> 2) & 1, (k >> 1) & 1, k & 1).
CORNER_OFFSETS = np.array([[(k >> 2) & 1, (k >> 1) & 1, k & 1] for k in range(8)], dtype=np.int64)


@dataclass(frozen=True, eq=False)
class FeatureGrid:
    dims: Tuple[int, int, int]
    bbox_min: np.ndarray
    bbox_max: np.ndarray
    features: np.ndarray  # (Nx, Ny, Nz, C) float16

    def __post_init__(self) -> None:
        dims = tuple(int(n) for n in self.dims)
        if len(dims) != 3 or min(dims) < 2:
            raise SceneConfigError(f"grid needs at least 2 vertices per axis, got {dims}")
        bbox_min = np.asarray(self.bbox_min, dtype=np.float64).reshape(3)
        bbox_max = np.asarray(self.bbox_max, dtype=np.float64).reshape(3)
        if np.any(bbox_max <= bbox_min):
            raise SceneConfigError("bbox_max must exceed bbox_min on every axis")
        features = np.ascontiguousarray(self.features, dtype=np.float16)
        if features.ndim != 4 or features.shape[:3] != dims:
            raise SceneConfigError(f"feature array shape {features.shape} does not match dims {dims}")
        if features.shape[3] < 4:
            raise SceneConfigError(f"need at least 4 channels, got {features.shape[3]}")
        features.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "bbox_min", bbox_min)
        object.__setattr__(self, "bbox_max", bbox_max)
        object.__setattr__(self, "features", features)

    @property
    def channels(self) -> int:
        return int(self.features.shape[3])

    @property
    def num_vertices(self) -> int:
        return int(np.prod(self.dims))

    @property
    def cell_size(self) -> np.ndarray:
        return (self.bbox_max - self.bbox_min) / (np.asarray(self.dims, dtype=np.float64) - 1.0)

    @property
    def nbytes(self) -> int:
        return int(self.features.nbytes)

    @cached_property
    def features32(self) -> np.ndarray:
        """(V, C) float32 view of the vertex features."""
        return self.features.reshape(-1, self.channels).astype(np.float32)

    def channel_table(self, channels: Sequence[int]) -> np.ndarray:
        """Contiguous (V, len(channels)) float32 table for a channel subset."""
        key = tuple(int(c) for c in channels)
        cache = self.__dict__.setdefault("_channel_tables", {})
        if key not in cache:
            cache[key] = np.ascontiguousarray(self.features32[:, list(key)])
        return cache[key]

    def vertex_positions(self) -> np.ndarray:
        axes = [np.linspace(self.bbox_min[a], self.bbox_max[a], self.dims[a]) for a in range(3)]
        gx, gy, gz = np.meshgrid(*axes, indexing="ij")
        return np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)

    def linear_vertex_ids(self, ijk: np.ndarray) -> np.ndarray:
        ijk = np.asarray(ijk, dtype=np.int64)
        _, ny, nz = self.dims
        return (ijk[..., 0] * ny + ijk[..., 1]) * nz + ijk[..., 2]

    def vertex_coords(self, vid: np.ndarray) -> np.ndarray:
        vid = np.asarray(vid, dtype=np.int64)
        _, ny, nz = self.dims
        return np.stack([vid // (ny * nz), (vid // nz) % ny, vid % nz], axis=-1)

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        return np.all((points >= self.bbox_min) & (points <= self.bbox_max), axis=1)

    def locate(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Vectorised voxel_id: (cells (N, 3) int64, frac (N, 3) float32)."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        rel = (points - self.bbox_min) / self.cell_size
        upper = np.asarray(self.dims, dtype=np.int64) - 2
        cells = np.clip(np.floor(rel).astype(np.int64), 0, upper)
        frac = np.clip(rel - cells, 0.0, 1.0).astype(np.float32)
        return cells, frac

    def corner_vertex_ids(self, cells: np.ndarray) -> np.ndarray:
        """(N, 8) vertex ids of each cell in corner order."""
        cells = np.asarray(cells, dtype=np.int64)
        corners = cells[:, None, :] + CORNER_OFFSETS[None, :, :]
        return self.linear_vertex_ids(corners)


@dataclass(eq=False)
class Scene:
    grid: FeatureGrid
    mlp: MlpWeights
    name: str = "scene"
    spec: Optional[object] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.mlp.in_channels != self.grid.channels:
            raise SceneConfigError(
                f"MLP expects {self.mlp.in_channels} channels, grid has {self.grid.channels}"
            )


def voxel_id(p: Sequence[float], grid: FeatureGrid) -> Tuple[int, np.ndarray, np.ndarray]:
    """Linear cell id, per-axis cell index and fractional coordinates of one point."""
    cells, frac = grid.locate(np.asarray(p, dtype=np.float64).reshape(1, 3))
    nx, ny, nz = grid.dims
    cell = cells[0]
    linear = int((cell[0] * (ny - 1) + cell[1]) * (nz - 1) + cell[2])
    return linear, cell, frac[0]


def trilinear_weights(frac: np.ndarray) -> np.ndarray:
    """(N, 8) float32 corner weights, evaluated in a fixed operation order."""
    frac = np.ascontiguousarray(np.atleast_2d(frac), dtype=np.float32)
    one = np.float32(1.0)
    fx, fy, fz = frac[:, 0], frac[:, 1], frac[:, 2]
    wx = (one - fx, fx)
    wy = (one - fy, fy)
    wz = (one - fz, fz)
    weights = np.empty((len(frac), 8), dtype=np.float32)
    for k in range(8):
        weights[:, k] = (wx[(k >> 2) & 1] * wy[(k >> 1) & 1]) * wz[k & 1]
    return weights


def interpolate(table: np.ndarray, vids: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Sum of weight-scaled corner rows, accumulated in corner order 0..7.

    table is a (V, K) float32 array, vids (N, 8) rows into it.
    """
    out = np.zeros((len(vids), table.shape[1]), dtype=np.float32)
    for k in range(8):
        out += weights[:, k : k + 1] * table[vids[:, k]]
    return out
