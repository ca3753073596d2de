"""
Synthetic scenes: analytic primitives rasterized into a feature grid.

Channel 0 holds a density logit that is linear in signed distance and
clamped, so surfaces are sharp at grid resolution. Channels 1..3 hold the
colour logit of the nearest primitive, dilated into empty space so that
trilinear interpolation near a surface sees one colour. Any further
channels carry small seeded values that only a random-weight decoder reads.
"""

from __future__ import annotations

import logging
import tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from ..geometry import CameraIntrinsics, Pose, generate_rays
from ..logging_utils import log_structured
from .errors import SceneConfigError
from .grid import FeatureGrid, Scene
from .mlp import MlpWeights

logger = logging.getLogger(__name__)

PRIMITIVE_SPHERE = "sphere"
PRIMITIVE_BOX = "box"
MLP_IDENTITY = "identity"
MLP_RANDOM = "random"

COLOR_MIN = 0.02
COLOR_MAX = 0.98


@dataclass
class DensityConfig:
    inside: float = 400.0
    outside: float = -200.0
    slope: float = 400.0  # logit change per cell of signed distance


@dataclass
class Primitive:
    kind: str
    albedo: Tuple[float, float, float] = (0.7, 0.7, 0.7)
    center: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    radius: float = 0.5
    min: Tuple[float, float, float] = (-0.5, -0.5, -0.5)
    max: Tuple[float, float, float] = (0.5, 0.5, 0.5)
    texture_amp: float = 0.0
    texture_freq: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in (PRIMITIVE_SPHERE, PRIMITIVE_BOX):
            raise SceneConfigError(f"unknown primitive kind: {self.kind!r}")
        if self.kind == PRIMITIVE_SPHERE and not self.radius > 0:
            raise SceneConfigError(f"sphere radius must be positive, got {self.radius}")
        if self.kind == PRIMITIVE_BOX and np.any(np.asarray(self.max) <= np.asarray(self.min)):
            raise SceneConfigError("box max must exceed min on every axis")
        if len(self.albedo) != 3 or not all(0.0 <= a <= 1.0 for a in self.albedo):
            raise SceneConfigError(f"albedo must be an RGB triple in [0, 1], got {self.albedo}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Primitive":
        known = {"kind", "albedo", "center", "centre", "radius", "min", "max", "texture_amp", "texture_freq"}
        unknown = set(data) - known
        if unknown:
            raise SceneConfigError(f"unknown primitive keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "centre" in kwargs:
            kwargs["center"] = kwargs.pop("centre")
        for key in ("albedo", "center", "min", "max"):
            if key in kwargs:
                kwargs[key] = tuple(float(v) for v in kwargs[key])
        if "kind" not in kwargs:
            raise SceneConfigError("primitive needs a kind")
        return cls(**kwargs)

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        if self.kind == PRIMITIVE_SPHERE:
            return np.linalg.norm(points - np.asarray(self.center), axis=1) - self.radius
        center = (np.asarray(self.min) + np.asarray(self.max)) / 2.0
        half = (np.asarray(self.max) - np.asarray(self.min)) / 2.0
        q = np.abs(points - center) - half
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        inside = np.minimum(np.max(q, axis=1), 0.0)
        return outside + inside

    def color_at(self, points: np.ndarray) -> np.ndarray:
        albedo = np.asarray(self.albedo, dtype=np.float64)
        if self.texture_amp == 0.0:
            return np.clip(np.broadcast_to(albedo, points.shape).copy(), COLOR_MIN, COLOR_MAX)
        wave = np.sin(self.texture_freq * (points[:, 0] + points[:, 1] + points[:, 2]))
        return np.clip(albedo[None, :] * (1.0 + self.texture_amp * wave[:, None]), COLOR_MIN, COLOR_MAX)

    def intersect(self, origins: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        """Distance to the first surface hit in front of each origin, inf on a miss."""
        t = np.full(len(origins), np.inf)
        if self.kind == PRIMITIVE_SPHERE:
            oc = origins - np.asarray(self.center)
            b = np.einsum("ij,ij->i", oc, dirs)
            c = np.einsum("ij,ij->i", oc, oc) - self.radius**2
            disc = b * b - c
            hit = disc >= 0
            root = np.sqrt(np.where(hit, disc, 0.0))
            near = -b - root
            far = -b + root
            cand = np.where(near > 0, near, far)
            ok = hit & (cand > 0)
            t[ok] = cand[ok]
            return t
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / dirs
            t1 = (np.asarray(self.min) - origins) * inv
            t2 = (np.asarray(self.max) - origins) * inv
        t_enter = np.nanmax(np.minimum(t1, t2), axis=1)
        t_exit = np.nanmin(np.maximum(t1, t2), axis=1)
        ok = (t_enter <= t_exit) & (t_exit > 0)
        cand = np.where(t_enter > 0, t_enter, t_exit)
        t[ok] = cand[ok]
        return t


@dataclass
class SceneSpec:
    dims: Tuple[int, int, int] = (64, 64, 64)
    channels: int = 32
    bbox_min: Tuple[float, float, float] = (-1.0, -1.0, -1.0)
    bbox_max: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    mlp_kind: str = MLP_IDENTITY
    mlp_hidden: int = 16
    mlp_seed: int = 0
    seed: int = 0
    name: str = "scene"
    density: DensityConfig = field(default_factory=DensityConfig)
    primitives: List[Primitive] = field(default_factory=list)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SceneSpec":
        if not data:
            raise SceneConfigError("empty scene description")
        grid = dict(data.get("grid", {}))
        mlp = dict(data.get("mlp", {}))
        density = dict(data.get("density", {}))
        dims = grid.get("dims", (64, 64, 64))
        if isinstance(dims, int):
            dims = (dims, dims, dims)
        mlp_kind = mlp.get("kind", MLP_IDENTITY)
        if mlp_kind not in (MLP_IDENTITY, MLP_RANDOM):
            raise SceneConfigError(f"unknown mlp kind: {mlp_kind!r}")
        try:
            return cls(
                dims=tuple(int(n) for n in dims),  # type: ignore[arg-type]
                channels=int(grid.get("channels", 32)),
                bbox_min=tuple(float(v) for v in grid.get("bbox_min", (-1.0, -1.0, -1.0))),  # type: ignore[arg-type]
                bbox_max=tuple(float(v) for v in grid.get("bbox_max", (1.0, 1.0, 1.0))),  # type: ignore[arg-type]
                mlp_kind=mlp_kind,
                mlp_hidden=int(mlp.get("hidden", 16)),
                mlp_seed=int(mlp.get("seed", 0)),
                seed=int(data.get("seed", 0)),
                name=str(data.get("name", "scene")),
                density=DensityConfig(**density),
                primitives=[Primitive.from_dict(p) for p in data.get("primitive", [])],
            )
        except TypeError as exc:
            raise SceneConfigError(f"invalid scene description: {exc}") from exc

    @classmethod
    def load(cls, path: Path) -> "SceneSpec":
        path = Path(path)
        if not path.exists():
            raise SceneConfigError(f"scene description not found: {path}")
        with path.open("rb") as f:
            try:
                parsed = tomllib.load(f)
            except tomllib.TOMLDecodeError as exc:
                raise SceneConfigError(f"cannot parse {path}: {exc}") from exc
        spec = cls.from_dict(parsed)
        if "name" not in parsed:
            spec.name = path.stem
        return spec


def _logit(p: np.ndarray) -> np.ndarray:
    return np.log(p / (1.0 - p))


def build_synthetic_scene(spec: SceneSpec) -> Scene:
    """Rasterize the primitives of `spec` into a FeatureGrid plus decoder."""
    if spec.channels < 4:
        raise SceneConfigError(f"need at least 4 channels, got {spec.channels}")
    dims = tuple(spec.dims)
    probe = FeatureGrid(dims, spec.bbox_min, spec.bbox_max, np.zeros(dims + (4,), dtype=np.float16))
    positions = probe.vertex_positions()
    h = float(np.min(probe.cell_size))
    n = len(positions)

    features = np.zeros((n, spec.channels), dtype=np.float32)
    if spec.primitives:
        distances = np.stack([p.signed_distance(positions) for p in spec.primitives], axis=1)
        nearest = np.argmin(distances, axis=1)
        distance = distances[np.arange(n), nearest]
        colors = np.empty((n, 3))
        for index, prim in enumerate(spec.primitives):
            sel = nearest == index
            if np.any(sel):
                colors[sel] = prim.color_at(positions[sel])
        features[:, 0] = np.clip(-distance / h * spec.density.slope, spec.density.outside, spec.density.inside)
        features[:, 1:4] = _logit(colors)
    else:
        features[:, 0] = spec.density.outside
    if spec.channels > 4:
        rng = np.random.default_rng(spec.seed)
        features[:, 4:] = rng.normal(0.0, 0.1, (n, spec.channels - 4))

    grid = FeatureGrid(dims, spec.bbox_min, spec.bbox_max, features.reshape(dims + (spec.channels,)))
    if spec.mlp_kind == MLP_RANDOM:
        mlp = MlpWeights.random(spec.channels, spec.mlp_hidden, seed=spec.mlp_seed)
    else:
        mlp = MlpWeights.identity(spec.channels)
    log_structured(
        logger,
        "Built synthetic scene",
        {"SCENE": spec.name, "PRIMITIVES": len(spec.primitives), "DIMS": "x".join(map(str, dims))},
        level=logging.DEBUG,
    )
    return Scene(grid=grid, mlp=mlp, name=spec.name, spec=spec)


@dataclass
class AnalyticImage:
    color: np.ndarray  # (H, W, 3) float32
    depth: np.ndarray  # (H, W) camera z, inf on a miss


def analytic_render(
    spec: SceneSpec, pose: Pose, intr: CameraIntrinsics, background: Sequence[float] = (0.0, 0.0, 0.0)
) -> AnalyticImage:
    """Closed-form image of the primitives, clipped to the grid box, at pixel centres."""
    centers = intr.pixel_centers()
    origins, dirs = generate_rays(intr, pose, centers)
    best_t = np.full(len(centers), np.inf)
    best_prim = np.full(len(centers), -1)
    lo, hi = np.asarray(spec.bbox_min), np.asarray(spec.bbox_max)
    for index, prim in enumerate(spec.primitives):
        clipped = prim
        if prim.kind == PRIMITIVE_BOX:
            clipped = Primitive(
                kind=PRIMITIVE_BOX,
                albedo=prim.albedo,
                min=tuple(np.maximum(prim.min, lo)),
                max=tuple(np.minimum(prim.max, hi)),
            )
        t = clipped.intersect(origins, dirs)
        closer = t < best_t
        best_t[closer] = t[closer]
        best_prim[closer] = index
    color = np.broadcast_to(np.asarray(background, dtype=np.float32), (len(centers), 3)).copy()
    for index, prim in enumerate(spec.primitives):
        sel = best_prim == index
        if np.any(sel):
            points = origins[sel] + best_t[sel, None] * dirs[sel]
            color[sel] = prim.color_at(points)
    optical_axis = pose.rotation[:, 2]
    depth = best_t * (dirs @ optical_axis)
    return AnalyticImage(
        color=color.reshape(intr.height, intr.width, 3),
        depth=depth.reshape(intr.height, intr.width),
    )


def vertex_plane(spec: SceneSpec, axis: int, index: int) -> float:
    """World coordinate of the index-th vertex plane along an axis."""
    step = (spec.bbox_max[axis] - spec.bbox_min[axis]) / (spec.dims[axis] - 1)
    return spec.bbox_min[axis] + index * step


def preset_spec(name: str, dims: int = 64, channels: int = 32, seed: int = 0) -> SceneSpec:
    """Built-in scenes: toy, slab, sphere, empty."""
    base = SceneSpec(dims=(dims, dims, dims), channels=channels, seed=seed, name=name)
    if name == "empty":
        return base
    if name == "slab":
        front = vertex_plane(base, 2, dims * 3 // 8)
        back = vertex_plane(base, 2, dims * 5 // 8)
        base.primitives = [
            Primitive(kind=PRIMITIVE_BOX, albedo=(0.8, 0.6, 0.3), min=(-0.9, -0.9, front), max=(0.9, 0.9, back))
        ]
        return base
    if name == "sphere":
        base.primitives = [Primitive(kind=PRIMITIVE_SPHERE, albedo=(0.3, 0.6, 0.8), center=(0.0, 0.0, 0.0), radius=0.8)]
        return base
    if name == "toy":
        base.primitives = [
            Primitive(
                kind=PRIMITIVE_BOX,
                albedo=(0.6, 0.6, 0.6),
                min=(-1.0, -1.0, 0.55),
                max=(1.0, 1.0, 0.95),
                texture_amp=0.2,
                texture_freq=3.0,
            ),
            Primitive(
                kind=PRIMITIVE_SPHERE,
                albedo=(0.75, 0.55, 0.45),
                center=(-0.3, 0.1, 0.0),
                radius=0.35,
                texture_amp=0.15,
                texture_freq=4.0,
            ),
            Primitive(
                kind=PRIMITIVE_BOX,
                albedo=(0.45, 0.6, 0.75),
                min=(0.15, -0.45, -0.35),
                max=(0.55, 0.15, 0.1),
                texture_amp=0.15,
                texture_freq=4.0,
            ),
        ]
        return base
    raise SceneConfigError(f"unknown scene preset: {name!r}")


def load_scene_spec(reference: str) -> SceneSpec:
    """A preset name or a path to a scene TOML file."""
    path = Path(reference)
    if path.suffix == ".toml" or path.exists():
        return SceneSpec.load(path)
    return preset_spec(reference)

