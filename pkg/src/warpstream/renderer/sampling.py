"""Indexing stage: uniform ray sampling and per-sample feature gathering."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from ..geometry import Ray
from ..scene.grid import FeatureGrid, interpolate, trilinear_weights


class RenderError(Exception):
    pass


@dataclass(frozen=True, eq=False)
class RaySample:
    ray_id: int
    sample_index: int
    position: np.ndarray
    t: float
    delta: float
    skipped: bool = False


def check_range(near: float, far: float, n: int) -> None:
    if not (near >= 0 and far > near):
        raise RenderError(f"invalid sampling range: near={near}, far={far}")
    if n < 2:
        raise RenderError(f"need at least 2 samples per ray, got {n}")


def sample_distances(near: float, far: float, n: int) -> Tuple[np.ndarray, float]:
    """Midpoint distances t_i = near + (i + 0.5) * delta and the common delta."""
    check_range(near, far, n)
    delta = (far - near) / n
    return near + (np.arange(n, dtype=np.float64) + 0.5) * delta, delta


def sample_ray(
    ray: Ray, near: float, far: float, n: int, grid: Optional[FeatureGrid] = None, ray_id: int = 0
) -> List[RaySample]:
    t, delta = sample_distances(near, far, n)
    positions = ray.origin[None, :] + t[:, None] * ray.direction[None, :]
    inside = grid.contains(positions) if grid is not None else np.ones(n, dtype=bool)
    return [
        RaySample(ray_id, i, positions[i], float(t[i]), delta, skipped=not bool(inside[i]))
        for i in range(n)
    ]


def sample_positions(origins: np.ndarray, dirs: np.ndarray, t: np.ndarray) -> np.ndarray:
    """(R, S, 3) sample positions for R rays at distances t."""
    return origins[:, None, :] + t[None, :, None] * dirs[:, None, :]


def gather_batch(grid: FeatureGrid, positions: np.ndarray, channels) -> np.ndarray:
    """Trilinear features of in-box positions, restricted to `channels`."""
    cells, frac = grid.locate(positions)
    vids = grid.corner_vertex_ids(cells)
    return interpolate(grid.channel_table(channels), vids, trilinear_weights(frac))


def gather_features(sample: RaySample, grid: FeatureGrid) -> Optional[np.ndarray]:
    """All C channels at a sample, or None when it lies outside the grid box."""
    if sample.skipped or not grid.contains(sample.position)[0]:
        return None
    return gather_batch(grid, sample.position.reshape(1, 3), range(grid.channels))[0]
