"""Quality metrics, comparison baselines and experiment orchestration."""

from .baselines import BaselineResult, render_downsampled, run_downsampled, run_temporal, upsample_bilinear
from .metrics import depth_l1, mse, overlap_percentage, psnr, sequence_psnr

__all__ = [
    "BaselineResult",
    "depth_l1",
    "mse",
    "overlap_percentage",
    "psnr",
    "render_downsampled",
    "run_downsampled",
    "run_temporal",
    "sequence_psnr",
    "upsample_bilinear",
]
