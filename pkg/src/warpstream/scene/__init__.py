"""Voxel feature grids, MVoxel partitioning and synthetic scenes."""

from .errors import SceneConfigError, SceneFormatError
from .grid import (
    FeatureGrid,
    Scene,
    interpolate,
    trilinear_weights,
    voxel_id,
)
from .mlp import MlpWeights
from .mvoxel import MVoxelGrid, partition_mvoxels
from .scene_io import load_scene, save_scene
from .synthetic import (
    AnalyticImage,
    Primitive,
    SceneSpec,
    analytic_render,
    build_synthetic_scene,
    load_scene_spec,
    preset_spec,
)

__all__ = [
    "AnalyticImage",
    "FeatureGrid",
    "MVoxelGrid",
    "MlpWeights",
    "Primitive",
    "Scene",
    "SceneConfigError",
    "SceneFormatError",
    "SceneSpec",
    "analytic_render",
    "build_synthetic_scene",
    "interpolate",
    "load_scene",
    "load_scene_spec",
    "partition_mvoxels",
    "preset_spec",
    "save_scene",
    "trilinear_weights",
    "voxel_id",
]
