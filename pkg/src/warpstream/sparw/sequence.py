"""
Sequence rendering with shared, extrapolated reference frames.

Trajectory frames [wN, (w+1)N) form window w and are all warped from
reference R_w. R_0 is a full render at the first trajectory pose. R_w for
w >= 1 sits at a pose extrapolated from the first two targets of window
w-1 (the two latest targets when N = 1) and is rendered while the remaining targets of window w-1 are
produced. With N <= 2 nothing remains, so window w waits for R_w.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.spatial.transform import Rotation
from tqdm import tqdm

from .. import constants
from ..config import RenderConfig, WarpConfig
from ..geometry import CameraIntrinsics, Pose
from ..logging_utils import log_structured
from ..renderer.pipeline import Frame, render_frame
from ..scene.grid import Scene
from .warping import TargetResult, render_target

logger = logging.getLogger(__name__)

LEDGER_COLUMNS = ["frame", "kind", "reference_id", "full_px", "warped_px", "sparse_px", "void_px", "psnr_vs_full"]


class SequenceError(Exception):
    pass


def check_warp_config(cfg: WarpConfig) -> None:
    if cfg.window < 1:
        raise SequenceError(f"warp window must be at least 1, got {cfg.window}")
    if not cfg.phi_deg >= 0:
        raise SequenceError(f"warp threshold must be non-negative, got {cfg.phi_deg}")
    if not cfg.frame_interval > 0:
        raise SequenceError(f"frame interval must be positive, got {cfg.frame_interval}")


def extrapolate_reference_pose(t1: Pose, t2: Pose, cfg: WarpConfig) -> Pose:
    """Constant-velocity extrapolation N/2 frame intervals past t2.

    Translation follows t2 + v * (N/2) * dt with v = (t2 - t1) / dt, so dt
    cancels. Orientation applies the t1 -> t2 rotation scaled by N/2 in
    axis-angle form.
    """
    half = cfg.window / 2.0
    translation = t2.translation + (t2.translation - t1.translation) * half
    relative = Rotation.from_matrix(t2.rotation @ t1.rotation.T)
    step = Rotation.from_rotvec(relative.as_rotvec() * half)
    rotation = step.as_matrix() @ t2.rotation
    return Pose(rotation, translation)


@dataclass
class FrameRecord:
    kind: str
    pose: Pose = field(repr=False)
    reference_id: int
    frame_index: Optional[int] = None
    concurrent_with: Optional[int] = None
    sources: Optional[Tuple[int, int]] = None

    @property
    def label(self) -> str:
        return f"R{self.reference_id}" if self.kind == constants.FRAME_REFERENCE else str(self.frame_index)


@dataclass
class SequenceSchedule:
    window: int
    records: List[FrameRecord] = field(default_factory=list)

    @property
    def references(self) -> List[FrameRecord]:
        return [r for r in self.records if r.kind == constants.FRAME_REFERENCE]

    @property
    def targets(self) -> List[FrameRecord]:
        return [r for r in self.records if r.kind == constants.FRAME_TARGET]

    def validate(self) -> None:
        scheduled = set()
        rendered = set()
        served = {}
        for record in self.records:
            if record.kind == constants.FRAME_REFERENCE:
                missing = sorted(set(record.sources or ()) - rendered)
                if missing:
                    raise SequenceError(
                        f"reference {record.reference_id} is extrapolated from targets {missing} "
                        "that are not rendered yet"
                    )
                scheduled.add(record.reference_id)
                continue
            if record.reference_id not in scheduled:
                raise SequenceError(
                    f"target {record.frame_index} uses reference {record.reference_id} before it is scheduled"
                )
            if record.concurrent_with is not None and record.concurrent_with not in scheduled:
                raise SequenceError(
                    f"target {record.frame_index} runs alongside reference {record.concurrent_with} "
                    "before it is scheduled"
                )
            served[record.reference_id] = served.get(record.reference_id, 0) + 1
            if served[record.reference_id] > self.window:
                raise SequenceError(f"reference {record.reference_id} serves more than {self.window} targets")
            rendered.add(record.frame_index)


def reference_sources(w: int, window: int) -> Tuple[int, int]:
    """Trajectory indices R_w (w >= 1) is extrapolated from."""
    latest = min((w - 1) * window + 1, w * window - 1)
    return max(latest - 1, 0), latest


def build_schedule(trajectory: Sequence[Pose], cfg: WarpConfig) -> SequenceSchedule:
    check_warp_config(cfg)
    if len(trajectory) < 2:
        raise SequenceError(f"trajectory needs at least 2 poses, got {len(trajectory)}")
    n = cfg.window
    windows = math.ceil(len(trajectory) / n)
    schedule = SequenceSchedule(window=n)
    schedule.records.append(FrameRecord(constants.FRAME_REFERENCE, trajectory[0], 0))
    for w in range(windows):
        end = min((w + 1) * n, len(trajectory))
        upcoming = None
        if w + 1 < windows:
            first, latest = reference_sources(w + 1, n)
            pose = extrapolate_reference_pose(trajectory[first], trajectory[latest], cfg)
            upcoming = FrameRecord(
                constants.FRAME_REFERENCE,
                pose,
                w + 1,
                concurrent_with=w if latest + 1 < end else None,
                sources=(first, latest),
            )
        running = None
        for k in range(w * n, end):
            schedule.records.append(
                FrameRecord(constants.FRAME_TARGET, trajectory[k], w, frame_index=k, concurrent_with=running)
            )
            if upcoming is not None and k == upcoming.sources[1]:
                schedule.records.append(upcoming)
                running = w + 1
    schedule.validate()
    return schedule


@dataclass
class LedgerRow:
    frame: str
    kind: str
    reference_id: int
    full_px: int
    warped_px: int
    sparse_px: int
    void_px: int
    psnr_vs_full: float = math.nan


@dataclass(eq=False)
class SequenceResult:
    schedule: SequenceSchedule
    frames: List[Frame]
    references: List[Frame]
    targets: List[TargetResult]
    ledger: List[LedgerRow]
    full_frames: Optional[List[Frame]] = None

    def ledger_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(row) for row in self.ledger], columns=LEDGER_COLUMNS)

    def write_ledger(self, path: Path) -> None:
        self.ledger_frame().to_csv(Path(path), index=False)

    @property
    def sparse_pixels(self) -> int:
        return sum(t.sparse_px for t in self.targets)

    @property
    def nerf_fraction(self) -> float:
        """Sparse NeRF pixels over all target pixels."""
        total = sum(t.frame.intr.num_pixels for t in self.targets)
        return self.sparse_pixels / float(total) if total else 0.0


def run_sequence(
    trajectory: Sequence[Pose],
    scene: Scene,
    cfg: RenderConfig,
    warp_cfg: WarpConfig,
    intr: Optional[CameraIntrinsics] = None,
    evaluate_quality: bool = False,
    progress: bool = False,
) -> SequenceResult:
    schedule = build_schedule(trajectory, warp_cfg)
    intr = intr or cfg.intrinsics()
    refs = schedule.references
    ref_frames: List[Optional[Frame]] = [None] * len(refs)
    targets: List[TargetResult] = []
    full_frames: List[Frame] = []
    psnrs = {}

    if evaluate_quality:
        from ..harness.metrics import psnr

    ref_frames[0] = render_frame(refs[0].pose, intr, scene, cfg)
    with ThreadPoolExecutor(max_workers=1) as pool:
        pending = {}
        bar = tqdm(total=len(schedule.targets), desc="sequence", disable=not progress)
        for record in schedule.records:
            w = record.reference_id
            if record.kind == constants.FRAME_REFERENCE:
                if w > 0:
                    pending[w] = pool.submit(render_frame, record.pose, intr, scene, cfg)
                continue
            if ref_frames[w] is None:
                ref_frames[w] = pending.pop(w).result()
            result = render_target(ref_frames[w], record.pose, intr, scene, cfg, warp_cfg)
            targets.append(result)
            if evaluate_quality:
                full = render_frame(record.pose, intr, scene, cfg)
                full_frames.append(full)
                psnrs[record.frame_index] = psnr(result.frame.color, full.color)
            bar.update(1)
        bar.close()

    ledger = []
    target_iter = iter(targets)
    for record in schedule.records:
        if record.kind == constants.FRAME_REFERENCE:
            ledger.append(
                LedgerRow(record.label, record.kind, record.reference_id, intr.num_pixels, 0, 0, 0)
            )
            continue
        result = next(target_iter)
        ledger.append(
            LedgerRow(
                record.label,
                record.kind,
                record.reference_id,
                0,
                result.warped_px,
                result.sparse_px,
                result.void_px,
                psnrs.get(record.frame_index, math.nan),
            )
        )

    log_structured(
        logger,
        "Rendered sequence",
        {
            constants.LOG_KEY_EVENT: constants.EVENT_SEQUENCE,
            constants.LOG_KEY_FRAME: len(targets),
            "REFERENCES": len(refs),
            "WINDOW": warp_cfg.window,
            "NERF_FRACTION": float(np.mean([t.nerf_fraction for t in targets])),
        },
    )
    return SequenceResult(
        schedule=schedule,
        frames=[t.frame for t in targets],
        references=[f for f in ref_frames if f is not None],
        targets=targets,
        ledger=ledger,
        full_frames=full_frames if evaluate_quality else None,
    )
