"""
Pixel-centric rendering: indexing, feature gathering, feature computation
and compositing for each ray.

All per-sample and per-ray arithmetic is float32 and elementwise with a
fixed operation order, so a pixel's value does not depend on which other
pixels share its batch, how rays are chunked, or how many workers run.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.special import expit

from .. import constants
from ..config import RenderConfig
from ..geometry import CameraIntrinsics, Pose, generate_rays
from ..logging_utils import log_structured
from ..scene.grid import Scene
from ..scene.mlp import MlpWeights
from .sampling import gather_batch, sample_distances, sample_positions

logger = logging.getLogger(__name__)

_EPS = np.float32(constants.EARLY_TERMINATION_EPS)
_ONE = np.float32(1.0)


@dataclass(frozen=True)
class SampleResult:
    sigma: float
    rgb: Tuple[float, float, float]


@dataclass
class RenderStats:
    """Work done by the three pipeline stages."""

    rays: int = 0
    samples_indexed: int = 0
    samples_gathered: int = 0
    vertex_reads: int = 0
    mlp_evals: int = 0

    def __add__(self, other: "RenderStats") -> "RenderStats":
        return RenderStats(
            self.rays + other.rays,
            self.samples_indexed + other.samples_indexed,
            self.samples_gathered + other.samples_gathered,
            self.vertex_reads + other.vertex_reads,
            self.mlp_evals + other.mlp_evals,
        )


@dataclass(eq=False)
class Frame:
    color: np.ndarray  # (H, W, 3) float32
    depth: np.ndarray  # (H, W) float64 camera z, inf where empty
    opacity: np.ndarray  # (H, W) float32
    pose: Pose
    intr: CameraIntrinsics
    stats: RenderStats = field(default_factory=RenderStats)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.intr.height, self.intr.width

    @property
    def finite(self) -> np.ndarray:
        return np.isfinite(self.depth)

    @property
    def reference_bytes(self) -> int:
        """8-bit RGB plus float32 depth, what a remote renderer would ship."""
        return self.intr.num_pixels * (3 + 4)


@dataclass(eq=False)
class SparseRender:
    pixels: np.ndarray  # (K,) linear pixel indices
    color: np.ndarray
    depth: np.ndarray
    opacity: np.ndarray
    stats: RenderStats

    @property
    def count(self) -> int:
        return int(len(self.pixels))

    def fill(self, color: np.ndarray, depth: np.ndarray, opacity: np.ndarray) -> None:
        """Write the rendered pixels into full-frame arrays in place."""
        color.reshape(-1, 3)[self.pixels] = self.color
        depth.reshape(-1)[self.pixels] = self.depth
        opacity.reshape(-1)[self.pixels] = self.opacity


@dataclass(eq=False)
class ProbeResult:
    depth: np.ndarray
    opacity: np.ndarray


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(np.float32(0.0), np.ascontiguousarray(x, dtype=np.float32))


def sigmoid(x: np.ndarray) -> np.ndarray:
    return expit(np.ascontiguousarray(x, dtype=np.float32))


def _hidden_layer(features: np.ndarray, mlp: MlpWeights) -> List[np.ndarray]:
    channels = mlp.active_channels
    n = len(features)
    hidden = []
    for h in range(mlp.hidden):
        acc = np.full(n, mlp.b1[h], dtype=np.float32)
        for i, c in enumerate(channels):
            acc = acc + mlp.w1[h, c] * features[:, i]
        hidden.append(np.maximum(acc, np.float32(0.0)))
    return hidden


def _output(hidden: List[np.ndarray], mlp: MlpWeights, j: int, n: int) -> np.ndarray:
    acc = np.full(n, mlp.b2[j], dtype=np.float32)
    for h in range(mlp.hidden):
        acc = acc + mlp.w2[j, h] * hidden[h]
    return acc


def decode_batch(features: np.ndarray, mlp: MlpWeights) -> Tuple[np.ndarray, np.ndarray]:
    """Decode (N, K) features over mlp.active_channels into sigma (N,) and rgb (N, 3).

    Accumulation runs term by term in channel order, then hidden-unit order.
    """
    hidden = _hidden_layer(features, mlp)
    out = [_output(hidden, mlp, j, len(features)) for j in range(4)]
    sigma = softplus(out[0])
    rgb = sigmoid(np.stack(out[1:4], axis=1))
    return sigma, rgb


def decode_density(features: np.ndarray, mlp: MlpWeights) -> np.ndarray:
    """The sigma output of decode_batch alone, bit for bit."""
    return softplus(_output(_hidden_layer(features, mlp), mlp, 0, len(features)))


def decode(feature: np.ndarray, weights: MlpWeights) -> SampleResult:
    feature = np.asarray(feature, dtype=np.float32).reshape(1, -1)
    sigma, rgb = decode_batch(feature[:, list(weights.active_channels)], weights)
    return SampleResult(float(sigma[0]), tuple(float(v) for v in rgb[0]))  # type: ignore[arg-type]


def composite_batch(
    sigma: np.ndarray, rgb: np.ndarray, t: np.ndarray, delta, tau: float = constants.DEFAULT_TAU
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Front-to-back compositing of (R, S) samples.

    Returns rgb (R, 3) float32, ray-distance depth (R,) float64 with inf
    where opacity < tau, and opacity (R,) float32.
    """
    sigma = np.asarray(sigma, dtype=np.float32)
    rays, samples = sigma.shape
    deltas = np.broadcast_to(np.asarray(delta, dtype=np.float32), (samples,))
    ts = np.asarray(t, dtype=np.float32)
    alpha = np.ascontiguousarray(-np.expm1(np.ascontiguousarray(-(sigma * deltas[None, :]))))

    trans = np.ones(rays, dtype=np.float32)
    acc_rgb = np.zeros((rays, 3), dtype=np.float32)
    acc_opacity = np.zeros(rays, dtype=np.float32)
    acc_t = np.zeros(rays, dtype=np.float32)
    for i in range(samples):
        a = alpha[:, i]
        if not a.any():
            continue
        live = trans >= _EPS
        if not live.any():
            break
        w = np.where(live, trans * a, np.float32(0.0))
        acc_rgb += w[:, None] * rgb[:, i]
        acc_opacity += w
        acc_t += w * ts[i]
        trans = trans * (_ONE - a)

    with np.errstate(divide="ignore", invalid="ignore"):
        depth = np.where(
            acc_opacity >= np.float32(tau), (acc_t / acc_opacity).astype(np.float64), np.inf
        )
    return acc_rgb, depth, acc_opacity


def composite(
    results, t, delta, tau: float = constants.DEFAULT_TAU
) -> Tuple[np.ndarray, float, float]:
    """Composite one ray's ordered SampleResults."""
    sigma = np.array([[r.sigma for r in results]], dtype=np.float32)
    rgb = np.array([[r.rgb for r in results]], dtype=np.float32).reshape(1, len(results), 3)
    color, depth, opacity = composite_batch(sigma, rgb, t, delta, tau)
    return color[0], float(depth[0]), float(opacity[0])


def _render_chunk(
    scene: Scene, origins: np.ndarray, dirs: np.ndarray, cfg: RenderConfig, density_only: bool
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, RenderStats]:
    t, delta = sample_distances(cfg.near, cfg.far, cfg.n_samples)
    positions = sample_positions(origins, dirs, t).reshape(-1, 3)
    inside = np.flatnonzero(scene.grid.contains(positions))
    sigma = np.zeros(len(positions), dtype=np.float32)
    rgb = np.zeros((len(positions), 3), dtype=np.float32)
    if len(inside):
        feats = gather_batch(scene.grid, positions[inside], scene.mlp.active_channels)
        if density_only:
            sigma[inside] = decode_density(feats, scene.mlp)
        else:
            sigma[inside], rgb[inside] = decode_batch(feats, scene.mlp)
    rays = len(origins)
    color, depth, opacity = composite_batch(
        sigma.reshape(rays, -1), rgb.reshape(rays, -1, 3), t, delta, cfg.tau
    )
    stats = RenderStats(
        rays=rays,
        samples_indexed=len(positions),
        samples_gathered=len(inside),
        vertex_reads=8 * len(inside),
        mlp_evals=0 if density_only else len(inside),
    )
    return color, depth, opacity, stats


def render_rays(
    scene: Scene, origins: np.ndarray, dirs: np.ndarray, cfg: RenderConfig, density_only: bool = False
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, RenderStats]:
    """Render rays in chunks, optionally on a thread pool; output order follows input order."""
    chunk = max(1, cfg.chunk_rays)
    bounds = [(start, min(start + chunk, len(origins))) for start in range(0, len(origins), chunk)]

    def work(bound):
        lo, hi = bound
        return _render_chunk(scene, origins[lo:hi], dirs[lo:hi], cfg, density_only)

    if cfg.workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]
    if not parts:
        return (
            np.zeros((0, 3), dtype=np.float32),
            np.zeros(0),
            np.zeros(0, dtype=np.float32),
            RenderStats(),
        )
    stats = RenderStats()
    for part in parts:
        stats = stats + part[3]
    return (
        np.concatenate([p[0] for p in parts]),
        np.concatenate([p[1] for p in parts]),
        np.concatenate([p[2] for p in parts]),
        stats,
    )


def finish_pixels(
    rgb: np.ndarray, ray_depth: np.ndarray, opacity: np.ndarray, dirs: np.ndarray, pose: Pose, cfg: RenderConfig
) -> Tuple[np.ndarray, np.ndarray]:
    """Pixel colour and camera-z depth from composited ray values.

    Pixels below the opacity threshold are empty and show the background.
    """
    background = np.asarray(cfg.background, dtype=np.float32)
    solid = opacity >= np.float32(cfg.tau)
    blended = rgb + (_ONE - opacity)[:, None] * background[None, :]
    color = np.where(solid[:, None], blended, background[None, :]).astype(np.float32)
    cosines = dirs @ pose.rotation[:, 2]
    depth = np.where(solid, ray_depth * cosines, np.inf)
    return color, depth


def render_frame(pose: Pose, intr: CameraIntrinsics, scene: Scene, cfg: RenderConfig) -> Frame:
    centers = intr.pixel_centers()
    origins, dirs = generate_rays(intr, pose, centers)
    rgb, ray_depth, opacity, stats = render_rays(scene, origins, dirs, cfg)
    color, depth = finish_pixels(rgb, ray_depth, opacity, dirs, pose, cfg)
    log_structured(
        logger,
        "Rendered frame",
        {
            constants.LOG_KEY_EVENT: constants.EVENT_RENDER,
            constants.LOG_KEY_PIXELS: intr.num_pixels,
            constants.LOG_KEY_SAMPLES: stats.samples_gathered,
        },
        level=logging.DEBUG,
    )
    return Frame(
        color=color.reshape(intr.height, intr.width, 3),
        depth=depth.reshape(intr.height, intr.width),
        opacity=opacity.reshape(intr.height, intr.width),
        pose=pose,
        intr=intr,
        stats=stats,
    )


def render_sparse(
    pose: Pose, intr: CameraIntrinsics, scene: Scene, mask: np.ndarray, cfg: RenderConfig
) -> SparseRender:
    """Render only the masked pixels; values match render_frame bit for bit."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (intr.height, intr.width):
        raise ValueError(f"mask shape {mask.shape} does not match {intr.height}x{intr.width}")
    pixels = np.flatnonzero(mask.ravel())
    if len(pixels) == 0:
        return SparseRender(
            pixels=pixels,
            color=np.zeros((0, 3), dtype=np.float32),
            depth=np.zeros(0),
            opacity=np.zeros(0, dtype=np.float32),
            stats=RenderStats(),
        )
    centers = intr.pixel_centers()[pixels]
    origins, dirs = generate_rays(intr, pose, centers)
    rgb, ray_depth, opacity, stats = render_rays(scene, origins, dirs, cfg)
    color, depth = finish_pixels(rgb, ray_depth, opacity, dirs, pose, cfg)
    return SparseRender(pixels=pixels, color=color, depth=depth, opacity=opacity, stats=stats)


def probe_depth(pose: Pose, intr: CameraIntrinsics, scene: Scene, cfg: RenderConfig) -> ProbeResult:
    """Camera-z depth of the density field alone.

    Only the decoder's density output is evaluated, with the same arithmetic
    as a full render, so the probe's empty pixels are exactly the pixels
    render_frame leaves empty, whatever the decoder.
    """
    centers = intr.pixel_centers()
    origins, dirs = generate_rays(intr, pose, centers)
    _, ray_depth, opacity, _ = render_rays(scene, origins, dirs, cfg, density_only=True)
    solid = opacity >= np.float32(cfg.tau)
    depth = np.where(solid, ray_depth * (dirs @ pose.rotation[:, 2]), np.inf)
    return ProbeResult(depth=depth.reshape(intr.height, intr.width), opacity=opacity.reshape(intr.height, intr.width))
