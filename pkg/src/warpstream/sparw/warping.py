"""
Radiance warping: reuse a reference frame's pixels at a nearby target pose
and render only what the reference cannot supply.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .. import constants
from ..config import RenderConfig, WarpConfig
from ..geometry import (
    CameraIntrinsics,
    Pose,
    project,
    ray_angles,
    relative_transform,
    transform_points,
    unproject,
)
from ..logging_utils import log_structured
from ..renderer.pipeline import Frame, ProbeResult, probe_depth, render_sparse
from ..scene.grid import Scene

logger = logging.getLogger(__name__)

DEPTH_TIE_EPS = 1e-6


@dataclass(eq=False)
class WarpResult:
    color: np.ndarray  # (H, W, 3) float32
    depth: np.ndarray  # (H, W) splat depth, inf where nothing landed
    opacity: np.ndarray  # (H, W) opacity carried from the source pixel
    valid: np.ndarray  # (H, W) bool
    hole_kind: np.ndarray  # (H, W) int8, constants.HOLE_*
    angles: np.ndarray  # (H, W) radians, nan where nothing landed
    source: np.ndarray  # (H, W) reference linear pixel index, -1 where nothing landed
    dropped_behind: int = 0
    dropped_outside: int = 0

    @property
    def landed(self) -> np.ndarray:
        return self.source >= 0

    @property
    def disoccluded(self) -> np.ndarray:
        return self.hole_kind == constants.HOLE_DISOCCLUDED

    @property
    def void(self) -> np.ndarray:
        return self.hole_kind == constants.HOLE_VOID

    def with_holes(self, holes: "HoleSets") -> "WarpResult":
        kind = np.where(self.valid, constants.HOLE_WARPED, constants.HOLE_DISOCCLUDED).astype(np.int8)
        kind[holes.void] = constants.HOLE_VOID
        return replace(self, hole_kind=kind)


@dataclass(eq=False)
class HoleSets:
    disoccluded: np.ndarray
    void: np.ndarray


@dataclass(eq=False)
class TargetResult:
    frame: Frame
    warp: WarpResult
    warped_px: int
    sparse_px: int
    void_px: int
    demoted_px: int

    @property
    def nerf_fraction(self) -> float:
        return self.sparse_px / float(self.frame.intr.num_pixels)


def warp(ref: Frame, tgt_pose: Pose, intr: CameraIntrinsics, z_near: float = constants.Z_NEAR) -> WarpResult:
    """Forward-splat the finite-depth reference pixels into the target view.

    Each landed point goes to pixel (floor(u), floor(v)). Per target pixel
    the nearest depth wins; depths within a relative 1e-6 of the nearest
    are ties, won by the smaller reference pixel index.
    """
    height, width = intr.height, intr.width
    cloud = unproject(ref.color, ref.depth, ref.intr)
    moved = transform_points(cloud, relative_transform(ref.pose, tgt_pose))
    proj = project(moved, intr, z_near)

    px = np.floor(proj.pixels).astype(np.int64)
    target = px[:, 1] * width + px[:, 0]
    src = proj.source_pixels[:, 1] * ref.intr.width + proj.source_pixels[:, 0]
    depth = proj.depth

    nearest = np.full(height * width, np.inf)
    np.minimum.at(nearest, target, depth)
    candidate = depth <= nearest[target] * (1.0 + DEPTH_TIE_EPS)
    best_src = np.full(height * width, np.iinfo(np.int64).max)
    np.minimum.at(best_src, target[candidate], src[candidate])
    winners = np.flatnonzero(candidate & (src == best_src[target]))
    win_target = target[winners]

    color = np.zeros((height * width, 3), dtype=np.float32)
    out_depth = np.full(height * width, np.inf)
    opacity = np.zeros(height * width, dtype=np.float32)
    angles = np.full(height * width, np.nan)
    source = np.full(height * width, -1, dtype=np.int64)

    color[win_target] = proj.colors[winners]
    out_depth[win_target] = depth[winners]
    opacity[win_target] = ref.opacity.reshape(-1)[src[winners]]
    source[win_target] = src[winners]

    world = ref.pose.camera_to_world(cloud.points[proj.kept[winners]])
    ref_dirs = world - ref.pose.camera_center
    tgt_dirs = world - tgt_pose.camera_center
    ref_dirs /= np.linalg.norm(ref_dirs, axis=1, keepdims=True)
    tgt_dirs /= np.linalg.norm(tgt_dirs, axis=1, keepdims=True)
    angles[win_target] = ray_angles(ref_dirs, tgt_dirs)

    valid = source >= 0
    hole_kind = np.where(valid, constants.HOLE_WARPED, constants.HOLE_DISOCCLUDED).astype(np.int8)
    shape = (height, width)
    return WarpResult(
        color=color.reshape(height, width, 3),
        depth=out_depth.reshape(shape),
        opacity=opacity.reshape(shape),
        valid=valid.reshape(shape),
        hole_kind=hole_kind.reshape(shape),
        angles=angles.reshape(shape),
        source=source.reshape(shape),
        dropped_behind=proj.dropped_behind,
        dropped_outside=proj.dropped_outside,
    )


def classify_holes(w: WarpResult, tgt_depth_proj: Optional[np.ndarray]) -> HoleSets:
    """Split unwarped pixels into disoccluded (finite projected depth) and void.

    Without a projected depth map every unwarped pixel is disoccluded.
    """
    unwarped = ~w.valid
    if tgt_depth_proj is None:
        return HoleSets(disoccluded=unwarped, void=np.zeros_like(unwarped))
    finite = np.isfinite(np.asarray(tgt_depth_proj))
    return HoleSets(disoccluded=unwarped & finite, void=unwarped & ~finite)


def apply_phi(w: WarpResult, phi: float) -> WarpResult:
    """Demote warped pixels whose ray angle exceeds phi; phi <= 0 demotes all of them."""
    if math.isinf(phi) and phi > 0:
        return w
    if phi <= 0:
        demote = w.valid.copy()
    else:
        demote = w.valid & (w.angles > phi)
    if not demote.any():
        return w
    color = w.color.copy()
    color[demote] = 0.0
    depth = w.depth.copy()
    depth[demote] = np.inf
    hole_kind = w.hole_kind.copy()
    hole_kind[demote] = constants.HOLE_DISOCCLUDED
    return replace(w, color=color, depth=depth, valid=w.valid & ~demote, hole_kind=hole_kind)


def render_target(
    ref: Frame,
    tgt_pose: Pose,
    intr: CameraIntrinsics,
    scene: Scene,
    cfg: RenderConfig,
    warp_cfg: Optional[WarpConfig] = None,
    probe: Optional[ProbeResult] = None,
) -> TargetResult:
    """Warp, classify holes, apply phi, sparse-render the disoccluded pixels and compose."""
    warp_cfg = warp_cfg or WarpConfig()
    warped = warp(ref, tgt_pose, intr, warp_cfg.z_near)
    if probe is None:
        probe = probe_depth(tgt_pose, intr, scene, cfg)
    holes = classify_holes(warped, probe.depth)
    before = int(warped.valid.sum())
    warped = apply_phi(warped.with_holes(holes), warp_cfg.phi)
    demoted = before - int(warped.valid.sum())

    sparse = render_sparse(tgt_pose, intr, scene, warped.disoccluded, cfg)

    background = np.asarray(cfg.background, dtype=np.float32)
    color = warped.color.copy()
    depth = warped.depth.copy()
    opacity = warped.opacity.copy()
    void = warped.void
    color[void] = background
    depth[void] = np.inf
    opacity[void] = probe.opacity[void]
    sparse.fill(color, depth, opacity)

    frame = Frame(color=color, depth=depth, opacity=opacity, pose=tgt_pose, intr=intr, stats=sparse.stats)
    result = TargetResult(
        frame=frame,
        warp=warped,
        warped_px=int(warped.valid.sum()),
        sparse_px=sparse.count,
        void_px=int(void.sum()),
        demoted_px=demoted,
    )
    log_structured(
        logger,
        "Rendered target frame",
        {
            constants.LOG_KEY_EVENT: constants.EVENT_WARP,
            "WARPED": result.warped_px,
            "SPARSE": result.sparse_px,
            "VOID": result.void_px,
        },
        level=logging.DEBUG,
    )
    return result