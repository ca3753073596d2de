"""Pytest configuration and shared fixtures."""

from __future__ import annotations

import tempfile
from pathlib import Path
from typing import Generator, List

import pytest

from warpstream.config import OrbitConfig, RenderConfig
from warpstream.geometry import CameraIntrinsics, Pose
from warpstream.scene import Scene, SceneSpec, build_synthetic_scene, preset_spec
from warpstream.scene.synthetic import MLP_RANDOM, Primitive
from warpstream.sparw import orbit_trajectory

SMALL_DIMS = 16
SMALL_CHANNELS = 8
SMALL_SIZE = 24


@pytest.fixture
def temp_dir() -> Generator[Path, None, None]:
    """Create a temporary directory for test files."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture
def intr() -> CameraIntrinsics:
    """Small centred camera with a 30 degree field of view."""
    return CameraIntrinsics.from_fov(SMALL_SIZE, SMALL_SIZE, 30.0)


@pytest.fixture
def render_cfg() -> RenderConfig:
    """Render settings sized for unit tests."""
    return RenderConfig(width=SMALL_SIZE, height=SMALL_SIZE, n_samples=48)


@pytest.fixture
def front_pose() -> Pose:
    """Camera on -Z looking at the origin, the first orbit pose."""
    return Pose.look_at((0.0, 0.0, -3.0), (0.0, 0.0, 0.0))


@pytest.fixture(scope="session")
def toy_scene() -> Scene:
    return build_synthetic_scene(preset_spec("toy", dims=SMALL_DIMS, channels=SMALL_CHANNELS))


@pytest.fixture(scope="session")
def slab_scene() -> Scene:
    return build_synthetic_scene(preset_spec("slab", dims=SMALL_DIMS, channels=SMALL_CHANNELS))


@pytest.fixture(scope="session")
def empty_scene() -> Scene:
    return build_synthetic_scene(preset_spec("empty", dims=SMALL_DIMS, channels=SMALL_CHANNELS))


@pytest.fixture(scope="session")
def random_mlp_scene() -> Scene:
    """Sphere scene decoded by a seeded random MLP over every channel."""
    spec = SceneSpec(
        dims=(SMALL_DIMS,) * 3,
        channels=SMALL_CHANNELS,
        mlp_kind=MLP_RANDOM,
        mlp_hidden=8,
        mlp_seed=3,
        seed=3,
        name="random-sphere",
        primitives=[Primitive(kind="sphere", albedo=(0.3, 0.6, 0.8), radius=0.7)],
    )
    return build_synthetic_scene(spec)


@pytest.fixture
def orbit() -> List[Pose]:
    """Six orbit poses one degree apart."""
    return orbit_trajectory(OrbitConfig(frames=6, step_deg=1.0))


@pytest.fixture
def scene_toml(temp_dir: Path) -> Path:
    """Create a small scene description."""
    content = """
name = "tiny"

[grid]
dims = 16
channels = 8

[[primitive]]
kind = "sphere"
center = [0.0, 0.0, 0.0]
radius = 0.6
albedo = [0.3, 0.6, 0.8]

[[primitive]]
kind = "box"
min = [-1.0, -1.0, 0.6]
max = [1.0, 1.0, 0.9]
albedo = [0.6, 0.6, 0.6]
"""
    path = temp_dir / "tiny.toml"
    path.write_text(content)
    return path


@pytest.fixture
def mock_config_file(temp_dir: Path, scene_toml: Path) -> Path:
    """Create a test experiment configuration file."""
    content = f"""
seed = 7
mode = "sparw"
scene = "{scene_toml.name}"
output_dir = "{(temp_dir / 'report').as_posix()}"
warp_window = 2

[render]
width = 16
height = 16
n_samples = 24

[warp]
phi_deg = 5.0

[orbit]
frames = 4
step_deg = 1.0

[memory]
characterization_batches = 50
"""
    path = temp_dir / "warpstream.toml"
    path.write_text(content)
    return path
