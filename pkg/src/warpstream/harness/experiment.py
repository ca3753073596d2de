"""
Experiment orchestration: render a trajectory in one execution mode, run
the memory simulators on a representative frame and write the report
directory.

Report layout:
    frames/<label>.ppm, frames/<label>_depth.pfm
    ledger.csv          per-frame pixel accounting
    trace_metrics.csv   metric,value rows from the memory simulators
    cycles_energy.csv   modeled cycles and energy per variant and scenario
    summary.csv         metric,value rows, schema in SUMMARY_METRICS
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from .. import constants
from ..config import EnergyModel, ExperimentConfig, GuConfig
from ..geometry import CameraIntrinsics, GeometryError, Pose
from ..logging_utils import log_structured
from ..memsim import (
    AccessTrace,
    BankLayout,
    SimulatorConfigError,
    attribute_savings,
    classify_trace,
    energy_report,
    filter_misses,
    frame_costs,
    model_variants,
    random_schedule,
    remote_model,
    render_memory_centric,
    simulate_bank_conflicts,
    simulate_cache,
    simulate_gu,
    trace_pixel_centric,
)
from ..memsim.trace import frame_rays
from ..memsim.variants import SCENARIO_LOCAL, SCENARIO_REMOTE, VARIANT_FULL, VARIANTS, FrameCosts, VariantRow
from ..renderer import Frame, RenderError, render_frame, write_pfm, write_ppm
from ..scene import (
    Scene,
    SceneConfigError,
    SceneFormatError,
    build_synthetic_scene,
    load_scene,
    load_scene_spec,
    partition_mvoxels,
)
from ..sparw import SequenceError, load_trajectory, orbit_trajectory, run_sequence
from ..sparw.sequence import LEDGER_COLUMNS, LedgerRow, check_warp_config
from .baselines import run_downsampled, run_temporal
from .metrics import overlap_percentage, psnr, sequence_psnr

logger = logging.getLogger(__name__)

MIN_IMAGE_SIZE = 16

SUMMARY_METRICS = [
    "mode",
    "scene",
    "seed",
    "frames",
    "references",
    "window",
    "phi_deg",
    "width",
    "height",
    "mean_psnr_vs_full",
    "min_psnr_vs_full",
    "sequence_psnr_vs_full",
    "nerf_pixel_fraction",
    "mean_overlap_percentage",
    "render_equivalent",
    "pixel_centric_streaming_fraction",
    "memory_centric_streaming_fraction",
    "memory_centric_redundancy_ratio",
    "feature_major_conflict_rate",
    "channel_major_conflict_rate",
    "lru_miss_rate",
    "belady_miss_rate",
    "energy_saving_traffic_share",
    "local_full_speedup",
    "local_full_normalized_energy",
    "remote_full_speedup",
    "remote_full_normalized_energy",
]

VARIANT_COLUMNS = ["scenario", "variant", "seconds", "energy_j", "speedup", "normalized_energy", "modeled"]
METRIC_COLUMNS = ["metric", "value"]
SCENARIO_FRAME = "frame"

# Errors a mis-configured experiment can surface from the library
WRAPPED_ERRORS = (
    GeometryError,
    SceneConfigError,
    SceneFormatError,
    RenderError,
    SequenceError,
    SimulatorConfigError,
    OSError,
)


class ExperimentError(Exception):
    pass


@dataclass(eq=False)
class ModeRun:
    """Displayed frames of one mode, with their ledger and (optionally) full renders."""

    mode: str
    frames: List[Frame]
    labels: List[str]
    ledger: List[LedgerRow]
    nerf_fraction: float
    references: int = 0
    full_frames: Optional[List[Frame]] = None
    extra_frames: Dict[str, Frame] = field(default_factory=dict)
    sparse_fractions: List[float] = field(default_factory=list)


@dataclass(eq=False)
class MemsimMeasurement:
    pixel_centric: AccessTrace
    memory_centric: AccessTrace
    metrics: Dict[str, float]
    costs: FrameCosts


def _context(cfg: ExperimentConfig) -> str:
    return cfg.config_path or "<defaults>"


def validate(cfg: ExperimentConfig) -> None:
    where = _context(cfg)
    if cfg.mode not in constants.MODES:
        raise ExperimentError(f"{where}: unknown mode {cfg.mode!r}, expected one of {constants.MODES}")
    if cfg.render.width < MIN_IMAGE_SIZE or cfg.render.height < MIN_IMAGE_SIZE:
        raise ExperimentError(
            f"{where}: image size {cfg.render.width}x{cfg.render.height} is below {MIN_IMAGE_SIZE}x{MIN_IMAGE_SIZE}"
        )
    if cfg.trajectory and not Path(cfg.trajectory).exists():
        raise ExperimentError(f"{where}: trajectory file not found: {cfg.trajectory}")
    if cfg.scene.endswith(".toml") and not Path(cfg.scene).exists():
        raise ExperimentError(f"{where}: scene description not found: {cfg.scene}")
    try:
        check_warp_config(cfg.warp)
    except SequenceError as exc:
        raise ExperimentError(f"{where}: {exc}") from exc


def load_experiment_scene(cfg: ExperimentConfig) -> Scene:
    """A saved scene file, or a preset / TOML description built with the experiment seed."""
    path = Path(cfg.scene)
    if path.suffix not in ("", ".toml") and path.exists():
        return load_scene(path)
    spec = replace(load_scene_spec(cfg.scene), seed=cfg.seed)
    return build_synthetic_scene(spec)


def load_experiment_trajectory(cfg: ExperimentConfig) -> List[Pose]:
    if cfg.trajectory:
        return load_trajectory(Path(cfg.trajectory))
    return orbit_trajectory(cfg.orbit, seed=cfg.seed)


def _full_frames(
    trajectory: Sequence[Pose], scene: Scene, cfg: ExperimentConfig, intr: CameraIntrinsics, progress: bool
) -> List[Frame]:
    return [render_frame(pose, intr, scene, cfg.render) for pose in tqdm(trajectory, desc="full", disable=not progress)]


def _full_ledger(kind: str, nerf_pixels: Sequence[int]) -> List[LedgerRow]:
    return [LedgerRow(str(k), kind, -1, int(px), 0, 0, 0) for k, px in enumerate(nerf_pixels)]


def run_mode(
    cfg: ExperimentConfig,
    scene: Scene,
    trajectory: Sequence[Pose],
    intr: CameraIntrinsics,
    progress: bool = False,
    full_frames: Optional[List[Frame]] = None,
) -> ModeRun:
    """Render `trajectory` in cfg.mode. `full_frames` may be passed in to reuse full renders."""
    mode = cfg.mode
    labels = [str(k) for k in range(len(trajectory))]

    if mode == constants.MODE_SPARW:
        seq = run_sequence(trajectory, scene, cfg.render, cfg.warp, intr, progress=progress)
        run = ModeRun(
            mode=mode,
            frames=seq.frames,
            labels=labels,
            ledger=seq.ledger,
            nerf_fraction=seq.nerf_fraction,
            references=len(seq.references),
            extra_frames={f"R{w}": ref for w, ref in enumerate(seq.references)},
            sparse_fractions=[t.nerf_fraction for t in seq.targets],
        )
    elif mode == constants.MODE_TEMP_WARP:
        base = run_temporal(trajectory, scene, cfg.render, cfg.warp, intr, progress=progress)
        kinds = [
            constants.FRAME_REFERENCE if k % cfg.warp.window == 0 else constants.FRAME_TARGET
            for k in range(len(trajectory))
        ]
        ledger = [
            LedgerRow(
                str(k),
                kind,
                k - 1 if kind == constants.FRAME_TARGET else -1,
                px if kind == constants.FRAME_REFERENCE else 0,
                0,
                px if kind == constants.FRAME_TARGET else 0,
                0,
            )
            for k, (kind, px) in enumerate(zip(kinds, base.nerf_pixels))
        ]
        references = kinds.count(constants.FRAME_REFERENCE)
        run = ModeRun(mode, base.frames, labels, ledger, base.nerf_fraction, references=references)
    elif mode == constants.MODE_DOWNSAMPLE_2:
        base = run_downsampled(trajectory, scene, cfg.render, intr, progress=progress)
        ledger = _full_ledger("downsampled", base.nerf_pixels)
        run = ModeRun(mode, base.frames, labels, ledger, base.nerf_fraction)
    elif mode == constants.MODE_MEMORY_CENTRIC:
        mgrid = partition_mvoxels(scene.grid, cfg.memory.buffer_bytes, halo_in_buffer=cfg.memory.halo_in_buffer)
        frames = [
            render_memory_centric(scene, mgrid, pose, intr, cfg.render).frame
            for pose in tqdm(trajectory, desc="memory-centric", disable=not progress)
        ]
        run = ModeRun(mode, frames, labels, _full_ledger("full", [intr.num_pixels] * len(frames)), 1.0)
    else:
        frames = full_frames if full_frames is not None else _full_frames(trajectory, scene, cfg, intr, progress)
        run = ModeRun(mode, frames, labels, _full_ledger("full", [intr.num_pixels] * len(frames)), 1.0)

    if cfg.evaluate_quality:
        if full_frames is None:
            full_frames = run.frames if mode == constants.MODE_PIXEL_CENTRIC else _full_frames(
                trajectory, scene, cfg, intr, progress
            )
        run.full_frames = full_frames
        _score_ledger(run)
    return run


def _score_ledger(run: ModeRun) -> None:
    """Fill psnr_vs_full for every displayed frame; sparw reference rows (R<w>) are never displayed."""
    assert run.full_frames is not None
    pairs = zip(run.labels, run.frames, run.full_frames)
    scores = {label: psnr(frame.color, full.color) for label, frame, full in pairs}
    for row in run.ledger:
        if row.frame in scores:
            row.psnr_vs_full = scores[row.frame]


def _conflict_rates(cfg: ExperimentConfig, vertices: int, channels: int) -> Tuple[float, float]:
    mcfg = cfg.memory
    schedule = random_schedule(mcfg.characterization_batches, mcfg.lanes, vertices, seed=cfg.seed)
    rates = []
    for mode in (constants.LAYOUT_FEATURE_MAJOR, constants.LAYOUT_CHANNEL_MAJOR):
        layout = BankLayout.from_bytes(mode, mcfg.characterization_banks, cfg.gu.bank_bytes, channels)
        rates.append(simulate_bank_conflicts(schedule, layout, mcfg.characterization_ports).conflict_rate)
    return rates[0], rates[1]


def measure_memory(scene: Scene, pose: Pose, intr: CameraIntrinsics, cfg: ExperimentConfig) -> MemsimMeasurement:
    """Both data flows on one frame through every simulator."""
    mcfg, gcfg, em = cfg.memory, cfg.gu, cfg.energy
    mgrid = partition_mvoxels(scene.grid, mcfg.buffer_bytes, halo_in_buffer=mcfg.halo_in_buffer)
    origins, dirs = frame_rays(pose, intr)
    pc_trace = trace_pixel_centric(scene, mgrid, origins, dirs, cfg.render)
    mc = render_memory_centric(scene, mgrid, pose, intr, cfg.render)
    reference = render_frame(pose, intr, scene, cfg.render)

    pc_features = pc_trace.select(constants.LEVEL_DRAM, constants.KIND_FEATURE)
    mc_features = mc.trace.select(constants.LEVEL_DRAM, constants.KIND_FEATURE)
    pc_stream = classify_trace(pc_features, mcfg.burst_bytes, mcfg.page_bytes)
    mc_stream = classify_trace(mc_features, mcfg.burst_bytes, mcfg.page_bytes)

    lru = simulate_cache(pc_features, mcfg.cache_bytes, mcfg.line_bytes, constants.POLICY_LRU)
    belady = simulate_cache(pc_features, mcfg.cache_bytes, mcfg.line_bytes, constants.POLICY_BELADY)
    filtered = filter_misses(pc_features, mcfg.cache_bytes, mcfg.line_bytes)
    fm_rate, cm_rate = _conflict_rates(cfg, mgrid.owned_vertices, mgrid.channels)
    gu = simulate_gu(mc.rit, gcfg)

    costs = frame_costs(scene, mgrid, pc_trace, mc, gcfg, mcfg, em)
    pc_energy = energy_report(pc_trace, costs.pixel_centric.cycles, em, mcfg.burst_bytes, mcfg.page_bytes)
    mc_energy = energy_report(mc.trace, costs.full.cycles, em, mcfg.burst_bytes, mcfg.page_bytes)
    savings = attribute_savings(pc_energy, mc_energy)
    link = remote_model(reference.reference_bytes, em)

    equivalent = bool(
        np.array_equal(mc.frame.color, reference.color)
        and np.array_equal(mc.frame.depth, reference.depth)
        and np.array_equal(mc.frame.opacity, reference.opacity)
    )
    metrics: Dict[str, float] = {
        "render_equivalent": float(equivalent),
        "mvoxels": mgrid.num_mvoxels,
        "mvoxels_fetched": len(mc.fetched),
        "mvoxel_block_bytes": mgrid.block_bytes,
        "rit_entries": len(mc.rit),
        "rit_bytes": mc.rit.nbytes,
        "address_limit": mc.address_limit,
        "samples_indexed": mc.frame.stats.samples_indexed,
        "samples_gathered": mc.frame.stats.samples_gathered,
        "vertex_reads": mc.frame.stats.vertex_reads,
        "mlp_evals": mc.frame.stats.mlp_evals,
    }
    for prefix, report in (("pixel_centric", pc_stream), ("memory_centric", mc_stream)):
        for key, value in report.as_dict().items():
            metrics[f"{prefix}_{key}"] = value
    metrics.update(
        lru_miss_rate=lru.miss_rate,
        belady_miss_rate=belady.miss_rate,
        cache_line_accesses=lru.accesses,
        cache_filtered_dram_bytes=filtered.bytes_total,
        feature_major_conflict_rate=fm_rate,
        channel_major_conflict_rate=cm_rate,
        vft_feature_major_conflict_rate=costs.details["feature_major_conflict_rate"],
    )
    for key, value in gu.as_dict().items():
        metrics[f"gu_{key}"] = value
    metrics["mac_cycles"] = costs.details["mac_cycles"]
    for prefix, report in (("pixel_centric", pc_energy), ("memory_centric", mc_energy)):
        for key, value in report.as_dict().items():
            metrics[f"{prefix}_{key}"] = value
    for key, value in savings.as_dict().items():
        metrics[f"energy_saving_{key}"] = value
    metrics.update(
        reference_bytes=reference.reference_bytes,
        remote_tx_latency_s=link.tx_latency_s,
        remote_tx_energy_j=link.tx_energy_j,
    )
    log_structured(
        logger,
        "Measured memory system",
        {
            constants.LOG_KEY_EVENT: constants.EVENT_MEMSIM,
            constants.LOG_KEY_MVOXELS: len(mc.fetched),
            "PC_STREAMING": pc_stream.streaming_fraction,
            "MC_STREAMING": mc_stream.streaming_fraction,
            "EQUIVALENT": equivalent,
        },
    )
    return MemsimMeasurement(pixel_centric=pc_trace, memory_centric=mc.trace, metrics=metrics, costs=costs)


def frame_rows(costs: FrameCosts, gcfg: GuConfig, em: EnergyModel) -> List[VariantRow]:
    """Single-frame cost of each hardware data flow, relative to the pixel-centric flow."""
    base = costs.pixel_centric
    rows = []
    for variant in VARIANTS:
        cost = costs.reference_cost(variant)
        rows.append(
            VariantRow(
                scenario=SCENARIO_FRAME,
                variant=variant,
                seconds=cost.cycles / gcfg.clock_hz,
                energy_j=cost.energy * em.joules_per_unit,
                speedup=base.cycles / cost.cycles if cost.cycles else math.inf,
                normalized_energy=cost.energy / base.energy if base.energy else math.nan,
            )
        )
    return rows


def write_metrics(path: Path, items: Iterable[Tuple[str, object]]) -> None:
    rows = [{"metric": key, "value": value} for key, value in items]
    pd.DataFrame(rows, columns=METRIC_COLUMNS).to_csv(Path(path), index=False)


def write_ledger(path: Path, run: ModeRun) -> None:
    pd.DataFrame([asdict(row) for row in run.ledger], columns=LEDGER_COLUMNS).to_csv(Path(path), index=False)


def _scored(values: Sequence[float]) -> List[float]:
    return [v for v in values if not math.isnan(v)]


def summarize(
    cfg: ExperimentConfig,
    run: ModeRun,
    memsim: MemsimMeasurement,
    variants: Sequence[VariantRow],
    overlaps: Sequence[float],
) -> Dict[str, object]:
    scores = _scored([row.psnr_vs_full for row in run.ledger])
    seq_psnr = math.nan
    if run.full_frames is not None:
        seq_psnr = sequence_psnr([f.color for f in run.frames], [f.color for f in run.full_frames])
    by_key = {(row.scenario, row.variant): row for row in variants}
    local_full = by_key.get((SCENARIO_LOCAL, VARIANT_FULL))
    remote_full = by_key.get((SCENARIO_REMOTE, VARIANT_FULL))
    m = memsim.metrics
    summary: Dict[str, object] = {
        "mode": run.mode,
        "scene": cfg.scene,
        "seed": cfg.seed,
        "frames": len(run.frames),
        "references": run.references,
        "window": cfg.warp.window,
        "phi_deg": cfg.warp.phi_deg,
        "width": cfg.render.width,
        "height": cfg.render.height,
        "mean_psnr_vs_full": float(np.mean(scores)) if scores else math.nan,
        "min_psnr_vs_full": float(np.min(scores)) if scores else math.nan,
        "sequence_psnr_vs_full": seq_psnr,
        "nerf_pixel_fraction": run.nerf_fraction,
        "mean_overlap_percentage": float(np.mean(overlaps)) if overlaps else math.nan,
        "render_equivalent": bool(m["render_equivalent"]),
        "pixel_centric_streaming_fraction": m["pixel_centric_streaming_fraction"],
        "memory_centric_streaming_fraction": m["memory_centric_streaming_fraction"],
        "memory_centric_redundancy_ratio": m["memory_centric_redundancy_ratio"],
        "feature_major_conflict_rate": m["feature_major_conflict_rate"],
        "channel_major_conflict_rate": m["channel_major_conflict_rate"],
        "lru_miss_rate": m["lru_miss_rate"],
        "belady_miss_rate": m["belady_miss_rate"],
        "energy_saving_traffic_share": m["energy_saving_traffic_share"],
        "local_full_speedup": local_full.speedup if local_full else math.nan,
        "local_full_normalized_energy": local_full.normalized_energy if local_full else math.nan,
        "remote_full_speedup": remote_full.speedup if remote_full else math.nan,
        "remote_full_normalized_energy": remote_full.normalized_energy if remote_full else math.nan,
    }
    assert list(summary) == SUMMARY_METRICS
    return summary


def write_frames(out_dir: Path, run: ModeRun) -> None:
    frames_dir = out_dir / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    named = list(run.extra_frames.items())
    named += [(f"frame_{int(label):04d}", frame) for label, frame in zip(run.labels, run.frames)]
    for name, frame in named:
        write_ppm(frames_dir / f"{name}.ppm", frame.color)
        write_pfm(frames_dir / f"{name}_depth.pfm", frame.depth)


def _overlaps(run: ModeRun, trajectory: Sequence[Pose], intr: CameraIntrinsics, cfg: ExperimentConfig) -> List[float]:
    """Overlap of every sparw target with its reference, against the full render's depth."""
    if run.mode != constants.MODE_SPARW or run.full_frames is None:
        return []
    refs = [run.extra_frames[f"R{w}"] for w in range(run.references)]
    return [
        overlap_percentage(refs[k // cfg.warp.window], pose, intr, full.depth)
        for k, (pose, full) in enumerate(zip(trajectory, run.full_frames))
    ]


def run_experiment(cfg: ExperimentConfig, progress: bool = False) -> Path:
    """Run the configured experiment and write its report directory; returns the directory."""
    validate(cfg)
    out_dir = Path(cfg.output_dir)
    try:
        scene = load_experiment_scene(cfg)
        trajectory = load_experiment_trajectory(cfg)
        intr = cfg.render.intrinsics()
        run = run_mode(cfg, scene, trajectory, intr, progress=progress)
        memsim = measure_memory(scene, trajectory[0], intr, cfg)
        variants = frame_rows(memsim.costs, cfg.gu, cfg.energy)
        if run.mode == constants.MODE_SPARW:
            variants += model_variants(memsim.costs, run.sparse_fractions, run.references, cfg.gu, cfg.energy)
        overlaps = _overlaps(run, trajectory, intr, cfg)

        out_dir.mkdir(parents=True, exist_ok=True)
        write_frames(out_dir, run)
        write_ledger(out_dir / "ledger.csv", run)
        write_metrics(out_dir / "trace_metrics.csv", memsim.metrics.items())
        pd.DataFrame([row.as_dict() for row in variants], columns=VARIANT_COLUMNS).to_csv(
            out_dir / "cycles_energy.csv", index=False
        )
        summary = summarize(cfg, run, memsim, variants, overlaps)
        write_metrics(out_dir / "summary.csv", summary.items())
    except WRAPPED_ERRORS as exc:
        raise ExperimentError(f"{_context(cfg)}: {exc}") from exc

    log_structured(
        logger,
        "Wrote experiment report",
        {
            constants.LOG_KEY_EVENT: constants.EVENT_REPORT,
            constants.LOG_KEY_MODE: cfg.mode,
            constants.LOG_KEY_FRAME: len(run.frames),
            constants.LOG_KEY_PSNR: summary["mean_psnr_vs_full"],
            constants.LOG_KEY_PATH: str(out_dir),
        },
    )
    return out_dir


def _sweep(
    cfg: ExperimentConfig,
    column: str,
    values: Sequence[float],
    apply: Callable[[ExperimentConfig, float], ExperimentConfig],
    progress: bool,
) -> pd.DataFrame:
    validate(cfg)
    try:
        scene = load_experiment_scene(cfg)
        trajectory = load_experiment_trajectory(cfg)
        intr = cfg.render.intrinsics()
        full = _full_frames(trajectory, scene, cfg, intr, progress)
        rows = []
        for value in values:
            point = apply(cfg, value)
            point = replace(point, mode=constants.MODE_SPARW, evaluate_quality=True)
            validate(point)
            run = run_mode(point, scene, trajectory, intr, progress=progress, full_frames=full)
            scores = _scored([row.psnr_vs_full for row in run.ledger])
            rows.append(
                {
                    column: value,
                    "mean_psnr": float(np.mean(scores)) if scores else math.nan,
                    "sequence_psnr": sequence_psnr([f.color for f in run.frames], [f.color for f in full]),
                    "nerf_fraction": run.nerf_fraction,
                    "references": run.references,
                }
            )
    except WRAPPED_ERRORS as exc:
        raise ExperimentError(f"{_context(cfg)}: {exc}") from exc
    return pd.DataFrame(rows, columns=[column, "mean_psnr", "sequence_psnr", "nerf_fraction", "references"])


def sweep_phi(cfg: ExperimentConfig, phis: Sequence[float], progress: bool = False) -> pd.DataFrame:
    """SpaRW quality and NeRF work per warp threshold (degrees)."""
    return _sweep(cfg, "phi_deg", phis, lambda c, v: replace(c, warp=replace(c.warp, phi_deg=float(v))), progress)


def sweep_window(cfg: ExperimentConfig, windows: Sequence[int], progress: bool = False) -> pd.DataFrame:
    """SpaRW quality and NeRF work per warp window."""
    return _sweep(cfg, "window", windows, lambda c, v: replace(c, warp=replace(c.warp, window=int(v))), progress)
