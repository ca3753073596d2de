"""Camera trajectories: the orbit generator and the pose-per-line text format."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Iterable, List, Optional

import numpy as np
from scipy.spatial.transform import Rotation

from ..config import OrbitConfig
from ..geometry import GeometryError, Pose

logger = logging.getLogger(__name__)


def orbit_trajectory(cfg: Optional[OrbitConfig] = None, seed: int = 0) -> List[Pose]:
    """Cameras on a horizontal circle around the origin, looking at it.

    Frame k sits at angle start + k * step; with jitter each orientation is
    perturbed by a seeded rotation of at most jitter_deg.
    """
    cfg = cfg or OrbitConfig()
    rng = np.random.default_rng(seed)
    poses = []
    for k in range(cfg.frames):
        angle = np.radians(cfg.start_deg + k * cfg.step_deg)
        eye = (cfg.radius * np.sin(angle), cfg.height, -cfg.radius * np.cos(angle))
        pose = Pose.look_at(eye, (0.0, 0.0, 0.0))
        if cfg.jitter_deg > 0:
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            magnitude = np.radians(cfg.jitter_deg) * rng.uniform()
            jitter = Rotation.from_rotvec(axis * magnitude).as_matrix()
            pose = Pose(jitter @ pose.rotation, pose.translation)
        poses.append(pose)
    return poses


def load_trajectory(path: Path) -> List[Pose]:
    """One pose per line, 12 numbers row-major 3x4; blank lines and # comments are skipped."""
    poses = []
    with Path(path).open("r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            try:
                poses.append(Pose.from_text(text))
            except GeometryError as exc:
                raise GeometryError(f"{path}:{lineno}: {exc}") from exc
    return poses


def save_trajectory(path: Path, poses: Iterable[Pose]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for pose in poses:
            f.write(pose.to_text() + "\n")
