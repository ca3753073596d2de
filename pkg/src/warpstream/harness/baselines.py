"""
Comparison baselines: half-resolution rendering with bilinear upsampling
(DS-2) and temporal warping from the previous displayed frame (Temp-N).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from .. import constants
from ..config import RenderConfig, WarpConfig
from ..geometry import CameraIntrinsics, Pose
from ..logging_utils import log_structured
from ..renderer.pipeline import Frame, render_frame
from ..scene.grid import Scene
from ..sparw.sequence import check_warp_config
from ..sparw.warping import render_target

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class BaselineResult:
    mode: str
    frames: List[Frame]
    nerf_pixels: List[int] = field(default_factory=list)

    @property
    def total_pixels(self) -> int:
        return sum(f.intr.num_pixels for f in self.frames)

    @property
    def nerf_fraction(self) -> float:
        total = self.total_pixels
        return sum(self.nerf_pixels) / float(total) if total else 0.0


def _lerp_axis(size_out: int, size_in: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Source indices and weights mapping output pixel centres onto a 2x coarser grid."""
    s = (np.arange(size_out, dtype=np.float64) + 0.5) * (size_in / size_out) - 0.5
    s = np.clip(s, 0.0, size_in - 1)
    i0 = np.floor(s).astype(np.int64)
    i1 = np.minimum(i0 + 1, size_in - 1)
    return i0, i1, (s - i0).astype(np.float32)


def upsample_bilinear(image: np.ndarray, height: int, width: int) -> np.ndarray:
    """Separable a + (b - a) * t interpolation; constant inputs stay exactly constant."""
    image = np.asarray(image, dtype=np.float32)
    squeeze = image.ndim == 2
    if squeeze:
        image = image[..., None]
    x0, x1, tx = _lerp_axis(width, image.shape[1])
    y0, y1, ty = _lerp_axis(height, image.shape[0])
    rows = image[:, x0] + (image[:, x1] - image[:, x0]) * tx[None, :, None]
    out = rows[y0] + (rows[y1] - rows[y0]) * ty[:, None, None]
    return out[..., 0] if squeeze else out


def upsample_nearest(image: np.ndarray, height: int, width: int) -> np.ndarray:
    ys = np.minimum((np.arange(height) * image.shape[0]) // height, image.shape[0] - 1)
    xs = np.minimum((np.arange(width) * image.shape[1]) // width, image.shape[1] - 1)
    return np.asarray(image)[ys[:, None], xs[None, :]]


def render_downsampled(pose: Pose, intr: CameraIntrinsics, scene: Scene, cfg: RenderConfig) -> Frame:
    """Render at half resolution and upsample colour and opacity bilinearly, depth by nearest."""
    low = render_frame(pose, intr.scaled(0.5), scene, cfg)
    return Frame(
        color=upsample_bilinear(low.color, intr.height, intr.width),
        depth=upsample_nearest(low.depth, intr.height, intr.width),
        opacity=upsample_bilinear(low.opacity, intr.height, intr.width),
        pose=pose,
        intr=intr,
        stats=low.stats,
    )


def run_downsampled(
    trajectory: Sequence[Pose], scene: Scene, cfg: RenderConfig, intr: CameraIntrinsics, progress: bool = False
) -> BaselineResult:
    result = BaselineResult(mode=constants.MODE_DOWNSAMPLE_2, frames=[])
    for pose in tqdm(trajectory, desc="downsample-2", disable=not progress):
        frame = render_downsampled(pose, intr, scene, cfg)
        result.frames.append(frame)
        result.nerf_pixels.append(frame.stats.rays)
    return result


def run_temporal(
    trajectory: Sequence[Pose],
    scene: Scene,
    cfg: RenderConfig,
    warp_cfg: WarpConfig,
    intr: CameraIntrinsics,
    progress: bool = False,
) -> BaselineResult:
    """Temp-N: a full render every N frames, every other frame warped from the frame before it.

    The reference is the previously displayed output, so warping error
    compounds across a window.
    """
    check_warp_config(warp_cfg)
    result = BaselineResult(mode=constants.MODE_TEMP_WARP, frames=[])
    previous = None
    for k, pose in enumerate(tqdm(trajectory, desc="temp-warp", disable=not progress)):
        if k % warp_cfg.window == 0 or previous is None:
            frame = render_frame(pose, intr, scene, cfg)
            pixels = intr.num_pixels
        else:
            target = render_target(previous, pose, intr, scene, cfg, warp_cfg)
            frame, pixels = target.frame, target.sparse_px
        result.frames.append(frame)
        result.nerf_pixels.append(pixels)
        previous = frame
    log_structured(
        logger,
        "Rendered temporal baseline",
        {
            constants.LOG_KEY_EVENT: constants.EVENT_SEQUENCE,
            constants.LOG_KEY_MODE: result.mode,
            constants.LOG_KEY_FRAME: len(result.frames),
            "NERF_FRACTION": result.nerf_fraction,
        },
    )
    return result
