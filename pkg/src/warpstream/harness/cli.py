"""
warpstream CLI - render frames, SpaRW sequences and memory-system reports

Subcommands:
- render     one frame of the trajectory
- warp-seq   a SpaRW (or baseline) sequence with its ledger
- memsim     access traces and simulator metrics for one frame
- report     the full experiment, optionally with phi / window sweeps
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, List, Optional, Sequence

from .. import constants
from ..config import ExperimentConfig
from ..geometry import Pose
from ..logging_utils import LOGGER_NAME, setup_logging
from ..renderer import render_frame, write_pfm, write_ppm
from .experiment import (
    ExperimentError,
    load_experiment_scene,
    load_experiment_trajectory,
    measure_memory,
    run_experiment,
    run_mode,
    sweep_phi,
    sweep_window,
    validate,
    write_frames,
    write_ledger,
    write_metrics,
)

logger = logging.getLogger(LOGGER_NAME)

RENDER_MODES = (constants.MODE_PIXEL_CENTRIC, constants.MODE_MEMORY_CENTRIC, constants.MODE_DOWNSAMPLE_2)
SEQUENCE_MODES = (constants.MODE_SPARW, constants.MODE_TEMP_WARP)


def _parse_list(text: str, kind: Callable[[str], Any] = float) -> List[Any]:
    return [kind(item) for item in text.split(",") if item.strip()]


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    """Defaults, then the config file, then explicit flags."""
    if args.config and not Path(args.config).exists():
        raise ExperimentError(f"config file not found: {args.config}")
    cfg = ExperimentConfig.load(Path(args.config) if args.config else None)

    top = {}
    for name in ("seed", "scene", "trajectory"):
        value = getattr(args, name, None)
        if value is not None:
            top[name] = value
    if getattr(args, "mode", None):
        top["mode"] = args.mode
    if getattr(args, "output", None):
        top["output_dir"] = args.output
    if getattr(args, "no_quality", False):
        top["evaluate_quality"] = False

    render = {}
    for flag, name in (("width", "width"), ("height", "height"), ("samples", "n_samples"), ("workers", "workers")):
        value = getattr(args, flag, None)
        if value is not None:
            render[name] = value
    warp = {}
    if getattr(args, "window", None) is not None:
        warp["window"] = args.window
    if getattr(args, "phi", None) is not None:
        warp["phi_deg"] = args.phi
    orbit = {}
    if getattr(args, "frames", None) is not None:
        orbit["frames"] = args.frames

    return replace(
        cfg,
        render=replace(cfg.render, **render),
        warp=replace(cfg.warp, **warp),
        orbit=replace(cfg.orbit, **orbit),
        **top,
    )


def _pose(cfg: ExperimentConfig, index: int) -> Pose:
    trajectory = load_experiment_trajectory(cfg)
    if not 0 <= index < len(trajectory):
        raise ExperimentError(f"pose index {index} outside trajectory of {len(trajectory)} poses")
    return trajectory[index]


def cmd_render(args):
    """Render one frame"""
    cfg = build_config(args)
    if cfg.mode in SEQUENCE_MODES:
        logger.info("Mode %s needs a sequence; rendering the frame %s", cfg.mode, constants.MODE_PIXEL_CENTRIC)
        cfg = replace(cfg, mode=constants.MODE_PIXEL_CENTRIC)
    validate(cfg)
    scene = load_experiment_scene(cfg)
    pose = _pose(cfg, args.pose_index)
    intr = cfg.render.intrinsics()

    if cfg.mode == constants.MODE_PIXEL_CENTRIC:
        frame = render_frame(pose, intr, scene, cfg.render)
    else:
        run = run_mode(replace(cfg, evaluate_quality=False), scene, [pose], intr)
        frame = run.frames[0]

    output = Path(args.output_image)
    output.parent.mkdir(parents=True, exist_ok=True)
    write_ppm(output, frame.color)
    print(f"Frame: {output} ({intr.width}x{intr.height}, {cfg.mode})")
    if args.depth:
        write_pfm(Path(args.depth), frame.depth)
        print(f"Depth: {args.depth}")
    stats = frame.stats
    print(f"Samples gathered: {stats.samples_gathered}  vertex reads: {stats.vertex_reads}  "
          f"MLP evals: {stats.mlp_evals}")
    return 0


def cmd_warp_sequence(args):
    """Render a warped sequence and its ledger"""
    cfg = build_config(args)
    validate(cfg)
    scene = load_experiment_scene(cfg)
    trajectory = load_experiment_trajectory(cfg)
    intr = cfg.render.intrinsics()

    run = run_mode(cfg, scene, trajectory, intr, progress=not args.verbose)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_frames(out_dir, run)
    write_ledger(out_dir / "ledger.csv", run)

    print(f"Mode: {run.mode}")
    print(f"Frames: {len(run.frames)}  references: {run.references}  window: {cfg.warp.window}")
    print(f"NeRF pixel fraction: {run.nerf_fraction:.4f}")
    scores = [row.psnr_vs_full for row in run.ledger if not math.isnan(row.psnr_vs_full)]
    if scores:
        print(f"PSNR vs full: mean {sum(scores) / len(scores):.2f} dB, min {min(scores):.2f} dB")
    print(f"Ledger: {out_dir / 'ledger.csv'}")
    return 0


def cmd_memsim(args):
    """Trace one frame through the memory simulators"""
    cfg = build_config(args)
    validate(cfg)
    scene = load_experiment_scene(cfg)
    pose = _pose(cfg, args.pose_index)
    measurement = measure_memory(scene, pose, cfg.render.intrinsics(), cfg)

    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_metrics(out_dir / "trace_metrics.csv", measurement.metrics.items())
    if args.traces:
        measurement.pixel_centric.to_csv(out_dir / "pixel_centric_trace.csv")
        measurement.memory_centric.to_csv(out_dir / "memory_centric_trace.csv")

    m = measurement.metrics
    print(f"Streaming fraction: pixel-centric {m['pixel_centric_streaming_fraction']:.4f}, "
          f"memory-centric {m['memory_centric_streaming_fraction']:.4f}")
    print(f"Redundancy: memory-centric {m['memory_centric_redundancy_ratio']:.4f}")
    print(f"Miss rate: LRU {m['lru_miss_rate']:.4f}, Belady {m['belady_miss_rate']:.4f}")
    print(f"Bank conflicts: feature-major {m['feature_major_conflict_rate']:.4f}, "
          f"channel-major {m['channel_major_conflict_rate']:.4f}")
    print(f"Render equivalent: {bool(m['render_equivalent'])}")
    print(f"Metrics: {out_dir / 'trace_metrics.csv'}")
    return 0


def cmd_report(args):
    """Run the full experiment"""
    cfg = build_config(args)
    out_dir = run_experiment(cfg, progress=not args.verbose)
    print(f"Report: {out_dir}")
    if args.sweep_phi:
        frame = sweep_phi(cfg, _parse_list(args.sweep_phi), progress=not args.verbose)
        frame.to_csv(out_dir / "phi_sweep.csv", index=False)
        print(f"Phi sweep: {out_dir / 'phi_sweep.csv'}")
    if args.sweep_window:
        frame = sweep_window(cfg, _parse_list(args.sweep_window, int), progress=not args.verbose)
        frame.to_csv(out_dir / "window_sweep.csv", index=False)
        print(f"Window sweep: {out_dir / 'window_sweep.csv'}")
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('-c', '--config', help='Experiment TOML file (default: ./warpstream.toml if present)')
    parser.add_argument('--seed', type=int, help='Seed for scene generation and trajectory jitter')
    parser.add_argument('--scene', help='Scene preset (toy, slab, sphere, empty), TOML description or scene file')
    parser.add_argument('--trajectory', help='Trajectory file, one 3x4 pose per line')
    parser.add_argument('--frames', type=int, help='Orbit length when no trajectory file is given')
    parser.add_argument('--width', type=int, help='Image width in pixels')
    parser.add_argument('--height', type=int, help='Image height in pixels')
    parser.add_argument('--samples', type=int, help='Samples per ray')
    parser.add_argument('--workers', type=int, help='Render worker threads')


def _add_warp(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--window', type=int, help='Warp window N (targets per reference)')
    parser.add_argument('--phi', type=float, help='Warp threshold in degrees (inf disables it)')


def main(argv: Optional[Sequence[str]] = None):
    """Main entry point"""
    parser = argparse.ArgumentParser(
        description='warpstream - radiance warping and streaming memory-system simulation',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  warpstream render --scene toy -o frame.ppm          Render the first orbit frame
  warpstream warp-seq --window 16 -o seq/             SpaRW sequence with ledger
  warpstream warp-seq --mode temp-warp -o temp/       Temporal baseline
  warpstream memsim --scene slab -o memsim/           Traces and simulator metrics
  warpstream report -c warpstream.toml                Full experiment report
  warpstream report --sweep-window 1,6,16,26          Report plus window sweep
"""
    )

    parser.add_argument('-v', '--verbose', action='store_true',
                        help='Enable verbose output')

    subparsers = parser.add_subparsers(dest='command', help='Command to execute')

    # render command
    render_parser = subparsers.add_parser('render', help='Render one frame')
    _add_common(render_parser)
    render_parser.add_argument('-m', '--mode', choices=RENDER_MODES,
                               help='Execution mode (default: the config mode, pixel-centric for sequence modes)')
    render_parser.add_argument('-p', '--pose-index', type=int, default=0,
                               help='Trajectory pose to render (default: 0)')
    render_parser.add_argument('-o', '--output', dest='output_image', default='frame.ppm',
                               help='Output PPM file (default: frame.ppm)')
    render_parser.add_argument('-d', '--depth', help='Also write the depth map to this PFM file')
    render_parser.set_defaults(func=cmd_render)

    # warp-seq command
    warp_parser = subparsers.add_parser('warp-seq', help='Render a SpaRW sequence')
    _add_common(warp_parser)
    _add_warp(warp_parser)
    warp_parser.add_argument('-m', '--mode', choices=SEQUENCE_MODES,
                             help='Sequence mode (default: the config mode)')
    warp_parser.add_argument('-o', '--output', help='Output directory')
    warp_parser.add_argument('--no-quality', action='store_true',
                             help='Skip full renders used for PSNR')
    warp_parser.set_defaults(func=cmd_warp_sequence)

    # memsim command
    memsim_parser = subparsers.add_parser('memsim', help='Run the memory simulators on one frame')
    _add_common(memsim_parser)
    memsim_parser.add_argument('-p', '--pose-index', type=int, default=0,
                               help='Trajectory pose to trace (default: 0)')
    memsim_parser.add_argument('-o', '--output', help='Output directory')
    memsim_parser.add_argument('-t', '--traces', action='store_true',
                               help='Also export both access traces as CSV')
    memsim_parser.set_defaults(func=cmd_memsim)

    # report command
    report_parser = subparsers.add_parser('report', help='Run the full experiment')
    _add_common(report_parser)
    _add_warp(report_parser)
    report_parser.add_argument('-m', '--mode', choices=constants.MODES, help='Execution mode')
    report_parser.add_argument('-o', '--output', help='Report directory')
    report_parser.add_argument('--no-quality', action='store_true',
                               help='Skip full renders used for PSNR')
    report_parser.add_argument('--sweep-phi', help='Comma-separated warp thresholds in degrees')
    report_parser.add_argument('--sweep-window', help='Comma-separated warp windows')
    report_parser.set_defaults(func=cmd_report)

    # Parse arguments
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return 1

    # Setup logging
    setup_logging(logging.DEBUG if args.verbose else logging.INFO)

    # Execute command
    try:
        return args.func(args)
    except KeyboardInterrupt:
        print("\nInterrupted")
        return 130
    except Exception as e:
        logger.error(f"Error: {e}", exc_info=args.verbose)
        return 1


if __name__ == '__main__':
    sys.exit(main())
