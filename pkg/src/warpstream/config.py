from __future__ import annotations

import math
import tomllib
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from . import constants
from .geometry import CameraIntrinsics

DEFAULT_CONFIG_PATH = Path("warpstream.toml")


def _section(config_dict: Dict[str, Any], name: str) -> Dict[str, Any]:
    section = config_dict.get(name, {})
    return dict(section) if isinstance(section, dict) else {}


def _build(cls, values: Dict[str, Any]):
    """Instantiate a config dataclass from the keys it knows, ignoring the rest."""
    names = {f.name for f in fields(cls)}
    return cls(**{key: value for key, value in values.items() if key in names})


@dataclass
class RenderConfig:
    width: int = 128
    height: int = 128
    fov_deg: float = 30.0
    focal: Optional[float] = None  # overrides fov_deg when set
    n_samples: int = 128
    near: float = 1.0
    far: float = 5.0
    tau: float = constants.DEFAULT_TAU
    background: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    workers: int = 1
    chunk_rays: int = 4096

    def __post_init__(self) -> None:
        self.background = tuple(float(v) for v in self.background)  # type: ignore[assignment]

    def intrinsics(self) -> CameraIntrinsics:
        if self.focal is not None:
            return CameraIntrinsics(self.focal, self.width / 2.0, self.height / 2.0, self.width, self.height)
        return CameraIntrinsics.from_fov(self.width, self.height, self.fov_deg)


@dataclass
class WarpConfig:
    window: int = 16
    phi_deg: float = math.inf
    frame_interval: float = 1.0 / 30.0
    z_near: float = constants.Z_NEAR

    @property
    def phi(self) -> float:
        return math.radians(self.phi_deg)


@dataclass
class GuConfig:
    banks: int = 32
    ports: int = 2
    mac_rows: int = 24
    mac_cols: int = 24
    vft_bytes: int = 32768
    rit_entries_per_buffer: int = 128
    bus_bytes_per_cycle: int = 16
    bank_bytes: int = 1024
    clock_hz: float = 1e9


@dataclass
class MemoryConfig:
    buffer_bytes: int = 32768
    cache_bytes: int = 2 * 1024 * 1024
    line_bytes: int = 64
    burst_bytes: int = 64
    page_bytes: int = 2048
    lanes: int = 16
    characterization_banks: int = 16
    characterization_ports: int = 1
    characterization_batches: int = 1000
    halo_in_buffer: bool = False


@dataclass
class EnergyModel:
    """Per-byte energy units; DRAM costs are tied to the SRAM unit."""

    e_sram: float = 1.0
    wireless_nj_per_byte: float = 100.0
    wireless_bytes_per_s: float = 10e6
    joules_per_unit: float = 1e-12  # converts trace energy units for the remote scenario

    @property
    def e_dram_stream(self) -> float:
        return 25.0 / 3.0 * self.e_sram

    @property
    def e_dram_random(self) -> float:
        return 25.0 * self.e_sram


@dataclass
class OrbitConfig:
    frames: int = 33
    radius: float = 3.0
    height: float = 0.0
    step_deg: float = 0.5
    start_deg: float = 0.0
    jitter_deg: float = 0.0


@dataclass
class ExperimentConfig:
    seed: int = 0
    mode: str = constants.MODE_SPARW
    scene: str = "toy"
    trajectory: Optional[str] = None
    output_dir: str = "warpstream-report"
    evaluate_quality: bool = True
    render: RenderConfig = field(default_factory=RenderConfig)
    warp: WarpConfig = field(default_factory=WarpConfig)
    gu: GuConfig = field(default_factory=GuConfig)
    memory: MemoryConfig = field(default_factory=MemoryConfig)
    energy: EnergyModel = field(default_factory=EnergyModel)
    orbit: OrbitConfig = field(default_factory=OrbitConfig)
    config_path: Optional[str] = None

    @classmethod
    def from_dict(cls, config_dict: Dict[str, Any]) -> "ExperimentConfig":
        render_dict = _section(config_dict, "render")
        warp_dict = _section(config_dict, "warp")

        # Flat keys are accepted for the most common knobs
        if "warp_window" in config_dict:
            warp_dict.setdefault("window", config_dict["warp_window"])
        if "phi_deg" in config_dict:
            warp_dict.setdefault("phi_deg", config_dict["phi_deg"])
        for key in ("width", "height", "n_samples"):
            if key in config_dict:
                render_dict.setdefault(key, config_dict[key])

        if "background" in render_dict:
            render_dict["background"] = tuple(render_dict["background"])

        return cls(
            seed=int(config_dict.get("seed", 0)),
            mode=config_dict.get("mode", constants.MODE_SPARW),
            scene=str(config_dict.get("scene", "toy")),
            trajectory=config_dict.get("trajectory"),
            output_dir=str(config_dict.get("output_dir", "warpstream-report")),
            evaluate_quality=bool(config_dict.get("evaluate_quality", True)),
            render=_build(RenderConfig, render_dict),
            warp=_build(WarpConfig, warp_dict),
            gu=_build(GuConfig, _section(config_dict, "gu")),
            memory=_build(MemoryConfig, _section(config_dict, "memory")),
            energy=_build(EnergyModel, _section(config_dict, "energy")),
            orbit=_build(OrbitConfig, _section(config_dict, "orbit")),
        )

    @classmethod
    def load(cls, path: Optional[Path] = None) -> "ExperimentConfig":
        cfg_path = Path(path) if path else DEFAULT_CONFIG_PATH
        if not cfg_path.exists():
            return cls()
        with cfg_path.open("rb") as f:
            parsed = tomllib.load(f)
        cfg = cls.from_dict(parsed)
        cfg.config_path = str(cfg_path)
        # Relative file references resolve against the config file's directory
        base = cfg_path.parent
        if cfg.trajectory and not Path(cfg.trajectory).is_absolute():
            cfg.trajectory = str(base / cfg.trajectory)
        if cfg.scene.endswith(".toml") and not Path(cfg.scene).is_absolute():
            cfg.scene = str(base / cfg.scene)
        return cfg
