"""
Pinhole camera model, rigid poses and the projection math used by warping.

Conventions:
  - camera looks down +Z in camera coordinates, +X right, +Y down
  - pixel (i, j) has its centre at (i + 0.5, j + 0.5)
  - Pose is camera-to-world: X_world = rotation @ X_cam + translation
  - all geometry is float64
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

import numpy as np

from . import constants

logger = logging.getLogger(__name__)

ORTHONORMAL_TOL = 1e-6


class GeometryError(Exception):
    pass


@dataclass(frozen=True)
class CameraIntrinsics:
    f: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if not self.f > 0:
            raise GeometryError(f"focal length must be positive, got {self.f}")
        if self.width <= 0 or self.height <= 0:
            raise GeometryError(f"image size must be positive, got {self.width}x{self.height}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise GeometryError(
                f"principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height} image"
            )

    @classmethod
    def from_fov(cls, width: int, height: int, fov_deg: float) -> "CameraIntrinsics":
        """Centred camera with the given horizontal field of view."""
        f = 0.5 * width / np.tan(np.radians(fov_deg) / 2.0)
        return cls(f=float(f), cx=width / 2.0, cy=height / 2.0, width=width, height=height)

    def scaled(self, factor: float) -> "CameraIntrinsics":
        width = max(1, int(round(self.width * factor)))
        height = max(1, int(round(self.height * factor)))
        return CameraIntrinsics(
            f=self.f * factor, cx=self.cx * factor, cy=self.cy * factor, width=width, height=height
        )

    @property
    def num_pixels(self) -> int:
        return self.width * self.height

    def pixel_centers(self) -> np.ndarray:
        """(H*W, 2) pixel-centre coordinates in row-major (y, then x) order."""
        ys, xs = np.meshgrid(
            np.arange(self.height, dtype=np.float64), np.arange(self.width, dtype=np.float64), indexing="ij"
        )
        return np.stack([xs.ravel() + 0.5, ys.ravel() + 0.5], axis=1)

    def contains(self, px: np.ndarray) -> np.ndarray:
        px = np.atleast_2d(px)
        return (px[:, 0] >= 0) & (px[:, 0] < self.width) & (px[:, 1] >= 0) & (px[:, 1] < self.height)


@dataclass(frozen=True, eq=False)
class Pose:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(rotation)) or not np.all(np.isfinite(translation)):
            raise GeometryError("pose contains non-finite values")
        if np.max(np.abs(rotation.T @ rotation - np.eye(3))) > ORTHONORMAL_TOL:
            raise GeometryError("pose rotation is not orthonormal")
        if abs(np.linalg.det(rotation) - 1.0) > ORTHONORMAL_TOL:
            raise GeometryError("pose rotation is not a proper rotation (det != +1)")
        rotation.setflags(write=False)
        translation.setflags(write=False)
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def look_at(cls, eye: Sequence[float], target: Sequence[float], up: Sequence[float] = (0.0, 1.0, 0.0)) -> "Pose":
        """Camera at `eye` with +Z pointing at `target`; `up` is the world direction of camera -Y."""
        eye = np.asarray(eye, dtype=np.float64)
        forward = np.asarray(target, dtype=np.float64) - eye
        norm = np.linalg.norm(forward)
        if norm == 0:
            raise GeometryError("look_at target coincides with eye")
        forward /= norm
        down = -np.asarray(up, dtype=np.float64)
        right = np.cross(down, forward)
        if np.linalg.norm(right) < 1e-12:
            raise GeometryError("look_at up vector is parallel to viewing direction")
        right /= np.linalg.norm(right)
        down = np.cross(forward, right)
        return cls(np.stack([right, down, forward], axis=1), eye)

    @classmethod
    def from_row_major(cls, values: Iterable[float]) -> "Pose":
        numbers = np.asarray(list(values), dtype=np.float64)
        if numbers.shape != (12,):
            raise GeometryError(f"pose needs 12 numbers (row-major 3x4), got {numbers.size}")
        matrix = numbers.reshape(3, 4)
        return cls(matrix[:, :3], matrix[:, 3])

    @classmethod
    def from_text(cls, line: str) -> "Pose":
        try:
            values = [float(token) for token in line.replace(",", " ").split()]
        except ValueError as exc:
            raise GeometryError(f"malformed pose line: {line.strip()!r}") from exc
        return cls.from_row_major(values)

    def to_row_major(self) -> np.ndarray:
        return np.concatenate([self.rotation, self.translation[:, None]], axis=1).ravel()

    def to_text(self) -> str:
        return " ".join(f"{value:.17g}" for value in self.to_row_major())

    @property
    def camera_center(self) -> np.ndarray:
        return self.translation

    def world_to_camera(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.translation) @ self.rotation

    def camera_to_world(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Maps points between camera frames: X_dst = rotation @ X_src + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def inverse(self) -> "RigidTransform":
        return RigidTransform(self.rotation.T, -(self.rotation.T @ self.translation))

    def is_rigid(self) -> bool:
        rotation = np.asarray(self.rotation)
        return (
            np.max(np.abs(rotation.T @ rotation - np.eye(3))) <= ORTHONORMAL_TOL
            and abs(np.linalg.det(rotation) - 1.0) <= ORTHONORMAL_TOL
        )


def relative_transform(ref: Pose, tgt: Pose) -> RigidTransform:
    """T_{ref->tgt}: reference camera coordinates to target camera coordinates."""
    rotation = tgt.rotation.T @ ref.rotation
    translation = tgt.rotation.T @ (ref.translation - tgt.translation)
    return RigidTransform(rotation, translation)


@dataclass(frozen=True, eq=False)
class Ray:
    origin: np.ndarray
    direction: np.ndarray


@dataclass(eq=False)
class PointCloud:
    points: np.ndarray
    colors: np.ndarray
    source_pixels: np.ndarray

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        self.colors = np.asarray(self.colors, dtype=np.float32).reshape(-1, 3)
        self.source_pixels = np.asarray(self.source_pixels, dtype=np.int64).reshape(-1, 2)
        if not (len(self.points) == len(self.colors) == len(self.source_pixels)):
            raise GeometryError(
                f"point cloud lists differ in length: {len(self.points)}, "
                f"{len(self.colors)}, {len(self.source_pixels)}"
            )

    def __len__(self) -> int:
        return len(self.points)


@dataclass(eq=False)
class ProjectionResult:
    pixels: np.ndarray  # (M, 2) continuous pixel coordinates
    depth: np.ndarray  # (M,) camera-space z
    colors: np.ndarray  # (M, 3)
    source_pixels: np.ndarray  # (M, 2)
    kept: np.ndarray  # (M,) indices into the projected cloud
    dropped_behind: int = 0
    dropped_outside: int = 0

    @property
    def dropped(self) -> int:
        return self.dropped_behind + self.dropped_outside

    def __len__(self) -> int:
        return len(self.depth)


def camera_directions(intr: CameraIntrinsics, px: np.ndarray) -> np.ndarray:
    """Unnormalised camera-space directions ((x - cx)/f, (y - cy)/f, 1)."""
    px = np.atleast_2d(np.asarray(px, dtype=np.float64))
    dirs = np.empty((len(px), 3), dtype=np.float64)
    dirs[:, 0] = (px[:, 0] - intr.cx) / intr.f
    dirs[:, 1] = (px[:, 1] - intr.cy) / intr.f
    dirs[:, 2] = 1.0
    return dirs


def generate_rays(intr: CameraIntrinsics, pose: Pose, px: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorised generate_ray: returns (origins, unit directions), both (N, 3)."""
    px = np.atleast_2d(np.asarray(px, dtype=np.float64))
    if not np.all(intr.contains(px)):
        bad = px[~intr.contains(px)][0]
        raise GeometryError(f"pixel ({bad[0]}, {bad[1]}) outside {intr.width}x{intr.height} image")
    dirs = camera_directions(intr, px) @ pose.rotation.T
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    origins = np.broadcast_to(pose.translation, dirs.shape).copy()
    return origins, dirs


def generate_ray(intr: CameraIntrinsics, pose: Pose, px: Sequence[float]) -> Ray:
    origins, dirs = generate_rays(intr, pose, np.asarray(px, dtype=np.float64).reshape(1, 2))
    return Ray(origins[0], dirs[0])


def unproject_points(pixels: np.ndarray, depth: np.ndarray, intr: CameraIntrinsics) -> np.ndarray:
    """Apply the unprojection matrix to continuous pixel coordinates with z-depth D."""
    pixels = np.atleast_2d(np.asarray(pixels, dtype=np.float64))
    depth = np.asarray(depth, dtype=np.float64).reshape(-1)
    if np.any(depth < 0) or np.any(np.isnan(depth)):
        raise GeometryError("negative or NaN depth cannot be unprojected")
    points = np.empty((len(depth), 3), dtype=np.float64)
    points[:, 0] = depth * (pixels[:, 0] - intr.cx) / intr.f
    points[:, 1] = depth * (pixels[:, 1] - intr.cy) / intr.f
    points[:, 2] = depth
    return points


def unproject(frame_color: np.ndarray, depth: np.ndarray, intr: CameraIntrinsics) -> PointCloud:
    """Convert a colour image and z-depth map into a camera-space point cloud.

    Pixels with infinite depth are excluded; the cloud is ordered by linear
    pixel index.
    """
    depth = np.asarray(depth, dtype=np.float64)
    if depth.shape != (intr.height, intr.width):
        raise GeometryError(f"depth map shape {depth.shape} does not match {intr.height}x{intr.width}")
    if np.any(depth < 0) or np.any(np.isnan(depth)):
        raise GeometryError("depth map contains negative or NaN values")
    flat_depth = depth.ravel()
    finite = np.flatnonzero(np.isfinite(flat_depth))
    centers = intr.pixel_centers()[finite]
    points = unproject_points(centers, flat_depth[finite], intr)
    colors = np.asarray(frame_color, dtype=np.float32).reshape(-1, 3)[finite]
    source = np.stack([finite % intr.width, finite // intr.width], axis=1)
    return PointCloud(points, colors, source)


def transform_points(pc: PointCloud, transform: RigidTransform) -> PointCloud:
    return PointCloud(transform.apply(pc.points), pc.colors, pc.source_pixels)


def project(pc: PointCloud, intr: CameraIntrinsics, z_near: float = constants.Z_NEAR) -> ProjectionResult:
    """Perspective projection; points at or behind z_near, or off-image, are dropped and counted."""
    z = pc.points[:, 2]
    in_front = z > z_near
    idx = np.flatnonzero(in_front)
    pts = pc.points[idx]
    pixels = np.empty((len(idx), 2), dtype=np.float64)
    pixels[:, 0] = intr.f * pts[:, 0] / pts[:, 2] + intr.cx
    pixels[:, 1] = intr.f * pts[:, 1] / pts[:, 2] + intr.cy
    on_image = intr.contains(pixels) if len(idx) else np.zeros(0, dtype=bool)
    kept = idx[on_image]
    return ProjectionResult(
        pixels=pixels[on_image],
        depth=z[kept],
        colors=pc.colors[kept],
        source_pixels=pc.source_pixels[kept],
        kept=kept,
        dropped_behind=int(len(z) - len(idx)),
        dropped_outside=int(len(idx) - len(kept)),
    )


def ray_angles(dirs_a: np.ndarray, dirs_b: np.ndarray) -> np.ndarray:
    dots = np.einsum("ij,ij->i", np.atleast_2d(dirs_a), np.atleast_2d(dirs_b))
    return np.arccos(np.clip(dots, -1.0, 1.0))


def ray_angle(a: Ray, b: Ray) -> float:
    return float(ray_angles(a.direction[None, :], b.direction[None, :])[0])
