"""Sparse radiance warping over reference frames."""

from .sequence import (
    FrameRecord,
    LedgerRow,
    SequenceError,
    SequenceResult,
    SequenceSchedule,
    build_schedule,
    extrapolate_reference_pose,
    reference_sources,
    run_sequence,
)
from .trajectory import load_trajectory, orbit_trajectory, save_trajectory
from .warping import HoleSets, TargetResult, WarpResult, apply_phi, classify_holes, render_target, warp

__all__ = [
    "FrameRecord",
    "HoleSets",
    "LedgerRow",
    "SequenceError",
    "SequenceResult",
    "SequenceSchedule",
    "TargetResult",
    "WarpResult",
    "apply_phi",
    "build_schedule",
    "classify_holes",
    "extrapolate_reference_pose",
    "load_trajectory",
    "orbit_trajectory",
    "reference_sources",
    "render_target",
    "run_sequence",
    "save_trajectory",
    "warp",
]
