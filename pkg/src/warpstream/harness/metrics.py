"""Image and sequence quality metrics."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from ..geometry import CameraIntrinsics, Pose
from ..renderer.pipeline import Frame


def _check_pair(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")


def mse(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_pair(a, b)
    return float(np.mean((a - b) ** 2))


def psnr_from_mse(value: float) -> float:
    if value == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / value)


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """PSNR in dB for colour images in [0, 1]; identical images give +inf."""
    return psnr_from_mse(mse(a, b))


def sequence_psnr(frames: Sequence[np.ndarray], references: Sequence[np.ndarray]) -> float:
    """PSNR of the frame-averaged MSE over a sequence."""
    if len(frames) != len(references):
        raise ValueError(f"{len(frames)} frames against {len(references)} references")
    if not frames:
        return math.nan
    return psnr_from_mse(float(np.mean([mse(a, b) for a, b in zip(frames, references)])))


def depth_l1(a: np.ndarray, b: np.ndarray) -> float:
    """Mean absolute depth difference where both maps are finite."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_pair(a, b)
    both = np.isfinite(a) & np.isfinite(b)
    if not both.any():
        return 0.0
    return float(np.mean(np.abs(a[both] - b[both])))


def overlap_percentage(ref: Frame, tgt_pose: Pose, intr: CameraIntrinsics, target_depth: np.ndarray) -> float:
    """Share of target pixels with finite depth that receive a reference splat, in percent."""
    from ..sparw.warping import warp

    finite = np.isfinite(np.asarray(target_depth))
    if not finite.any():
        return 0.0
    landed = warp(ref, tgt_pose, intr).landed
    return 100.0 * float((landed & finite).sum()) / float(finite.sum())
