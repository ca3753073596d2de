"""Integration tests for end-to-end rendering, warping and memory-system behaviour."""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from warpstream import constants
from warpstream.config import EnergyModel, ExperimentConfig, GuConfig, OrbitConfig, RenderConfig, WarpConfig
from warpstream.geometry import CameraIntrinsics, Pose
from warpstream.harness import overlap_percentage, render_downsampled, run_temporal
from warpstream.harness.experiment import run_experiment
from warpstream.harness.metrics import psnr
from warpstream.memsim import (
    AccessTrace,
    BankLayout,
    attribute_savings,
    classify_trace,
    energy_report,
    gu_cycles,
    random_schedule,
    remote_model,
    render_memory_centric,
    simulate_bank_conflicts,
    simulate_cache,
    simulate_gu_stepped,
    trace_pixel_centric,
)
from warpstream.memsim.gu import compute_cycles
from warpstream.memsim.trace import frame_rays
from warpstream.renderer import render_frame
from warpstream.renderer.sampling import sample_distances, sample_positions
from warpstream.scene import SceneSpec, build_synthetic_scene, partition_mvoxels, preset_spec
from warpstream.scene.synthetic import MLP_RANDOM, Primitive
from warpstream.sparw import orbit_trajectory, run_sequence, warp

BUFFER_BYTES = 32768


@pytest.fixture(scope="module")
def scene32():
    return build_synthetic_scene(preset_spec("toy", dims=32, channels=16))


@pytest.fixture(scope="module")
def intr64() -> CameraIntrinsics:
    return CameraIntrinsics.from_fov(64, 64, 30.0)


@pytest.fixture(scope="module")
def cfg64() -> RenderConfig:
    return RenderConfig(width=64, height=64, n_samples=64)


def _random_scene(seed: int):
    rng = np.random.default_rng(seed)
    spec = SceneSpec(
        dims=(int(rng.integers(6, 13)),) * 3,
        channels=int(rng.integers(4, 9)),
        mlp_kind=MLP_RANDOM,
        mlp_hidden=8,
        mlp_seed=seed,
        seed=seed,
        name=f"random-{seed}",
        primitives=[
            Primitive(
                kind="sphere",
                albedo=tuple(rng.uniform(0.1, 0.9, size=3)),
                center=tuple(rng.uniform(-0.3, 0.3, size=3)),
                radius=float(rng.uniform(0.3, 0.7)),
            )
        ],
    )
    return build_synthetic_scene(spec)


def _random_pose(rng) -> Pose:
    while True:
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        if abs(direction[1]) < 0.8:
            return Pose.look_at(direction * rng.uniform(2.5, 3.5), rng.uniform(-0.2, 0.2, size=3))


@pytest.mark.integration
class TestWarpExactness:
    """Test the degenerate warps reproduce full renders."""

    def test_identity_warp(self, scene32, intr64, cfg64):
        """Test warping a frame onto its own pose changes no finite pixel."""
        pose = orbit_trajectory(OrbitConfig(frames=1))[0]
        ref = render_frame(pose, intr64, scene32, cfg64)
        finite = np.isfinite(ref.depth)
        result = warp(ref, pose, intr64)

        assert finite.sum() > 100
        np.testing.assert_array_equal(result.color[finite], ref.color[finite])
        np.testing.assert_array_equal(result.depth[finite], ref.depth[finite])

    def test_phi_zero_sequence_is_full_rendering(self, scene32, intr64, cfg64):
        """Test a zero warp threshold makes every frame a full render."""
        trajectory = orbit_trajectory(OrbitConfig(frames=10, step_deg=1.0))
        result = run_sequence(trajectory, scene32, cfg64, WarpConfig(window=4, phi_deg=0.0), intr64)

        assert len(result.frames) == 10
        for frame, pose in zip(result.frames, trajectory):
            full = render_frame(pose, intr64, scene32, cfg64)
            np.testing.assert_array_equal(frame.color, full.color)
            np.testing.assert_array_equal(frame.depth, full.depth)


@pytest.mark.integration
class TestOverlap:
    """Test how much of a nearby view a reference covers."""

    @pytest.mark.parametrize("preset,step_deg", [("slab", 2.0), ("toy", 1.0)])
    def test_small_motion_overlaps(self, preset, step_deg, intr64, cfg64):
        """Test small camera steps keep nearly every visible pixel."""
        scene = build_synthetic_scene(preset_spec(preset, dims=32, channels=8))
        ref_pose, tgt_pose = orbit_trajectory(OrbitConfig(frames=2, step_deg=step_deg))
        ref = render_frame(ref_pose, intr64, scene, cfg64)
        target = render_frame(tgt_pose, intr64, scene, cfg64)

        assert overlap_percentage(ref, tgt_pose, intr64, target.depth) >= 95.0

    def test_looking_away(self, scene32, intr64, cfg64):
        """Test a camera facing away from the scene shares nothing."""
        ref_pose = orbit_trajectory(OrbitConfig(frames=1))[0]
        away = Pose.look_at((0.0, 0.0, -3.0), (0.0, 0.0, -6.0))
        ref = render_frame(ref_pose, intr64, scene32, cfg64)
        target = render_frame(away, intr64, scene32, cfg64)

        assert overlap_percentage(ref, away, intr64, target.depth) == 0.0


@pytest.mark.integration
class TestRenderOrder:
    """Test memory-centric and pixel-centric rendering agree."""

    def test_random_scenes_and_poses(self):
        """Test twenty random scenes render bit-identically in both orders."""
        rng = np.random.default_rng(11)
        intr = CameraIntrinsics.from_fov(16, 16, 40.0)
        cfg = RenderConfig(width=16, height=16, n_samples=24)
        for seed in range(20):
            scene = _random_scene(seed)
            pose = _random_pose(rng)
            mgrid = partition_mvoxels(scene.grid, BUFFER_BYTES, mshape=int(rng.integers(2, 6)))
            full = render_frame(pose, intr, scene, cfg)
            result = render_memory_centric(scene, mgrid, pose, intr, cfg)

            np.testing.assert_array_equal(result.frame.color, full.color)
            np.testing.assert_array_equal(result.frame.depth, full.depth)


@pytest.mark.integration
class TestStreaming:
    """Test DRAM access regularity of both execution orders."""

    def test_memory_centric_streams(self, intr64, cfg64):
        """Test MVoxel streaming reads every feature byte once, in order."""
        pose = orbit_trajectory(OrbitConfig(frames=1))[0]
        for preset in ("toy", "slab", "sphere"):
            scene = build_synthetic_scene(preset_spec(preset, dims=32, channels=16))
            mgrid = partition_mvoxels(scene.grid, BUFFER_BYTES)
            result = render_memory_centric(scene, mgrid, pose, intr64, cfg64)
            features = result.trace.select(level=constants.LEVEL_DRAM, kind=constants.KIND_FEATURE)
            report = classify_trace(features)

            assert len(features) > 0
            assert report.streaming_fraction == 1.0
            assert report.redundancy_ratio == 1.0

    def test_pixel_centric_is_mostly_random(self, scene32, intr64, cfg64):
        """Test per-ray gathers are mostly non-streaming."""
        pose = orbit_trajectory(OrbitConfig(frames=1, start_deg=30.0))[0]
        mgrid = partition_mvoxels(scene32.grid, BUFFER_BYTES)
        origins, dirs = frame_rays(pose, intr64)
        trace = trace_pixel_centric(scene32, mgrid, origins, dirs, cfg64)
        report = classify_trace(trace.select(kind=constants.KIND_FEATURE))

        assert report.streaming_fraction < 0.5
        assert report.redundancy_ratio > 1.0


@pytest.mark.integration
class TestRayIndexTable:
    """Test the RIT partitions a frame's samples."""

    def test_every_sample_in_exactly_one_entry(self):
        """Test in-box samples map one-to-one onto RIT entries of their owning MVoxel."""
        scene = build_synthetic_scene(preset_spec("toy", dims=16, channels=4))
        cfg = RenderConfig(width=32, height=32, n_samples=40)
        intr = CameraIntrinsics.from_fov(32, 32, 40.0)
        pose = orbit_trajectory(OrbitConfig(frames=1, start_deg=20.0, height=0.8))[0]
        mgrid = partition_mvoxels(scene.grid, BUFFER_BYTES, mshape=4)
        rit = render_memory_centric(scene, mgrid, pose, intr, cfg).rit

        origins, dirs = frame_rays(pose, intr)
        t, _ = sample_distances(cfg.near, cfg.far, cfg.n_samples)
        positions = sample_positions(origins, dirs, t).reshape(-1, 3)
        inside = np.flatnonzero(scene.grid.contains(positions))
        expected = np.stack([inside // cfg.n_samples, inside % cfg.n_samples], axis=1)

        ids = rit.sample_ids()
        assert len(ids) == len(expected) > 0
        assert len(np.unique(ids, axis=0)) == len(ids)
        np.testing.assert_array_equal(np.unique(ids, axis=0), np.unique(expected, axis=0))

        cells, _ = scene.grid.locate(positions[inside])
        owner = dict(zip(map(tuple, expected.tolist()), mgrid.mvoxel_of_cells(cells).tolist()))
        for m in rit.nonempty():
            start, end = rit.bounds(int(m))
            for ray, sample in ids[start:end].tolist():
                assert owner[(ray, sample)] == m


@pytest.mark.integration
class TestBankConflicts:
    """Test bank layouts on a random gather workload."""

    def test_layouts_on_uniform_vertices(self):
        """Test channel-major never collides and feature-major often does."""
        schedule = random_schedule(1000, 16, 512, seed=0)
        channel_major = simulate_bank_conflicts(schedule, BankLayout(constants.LAYOUT_CHANNEL_MAJOR, 16, 1024, 32))
        feature_major = simulate_bank_conflicts(schedule, BankLayout(constants.LAYOUT_FEATURE_MAJOR, 16, 1024, 32))

        assert channel_major.conflict_rate == 0.0
        assert feature_major.conflict_rate > 0.2


@pytest.mark.integration
class TestGatheringUnitModel:
    """Test the closed-form GU timing."""

    def test_formula_matches_stepping(self):
        """Test the formula against a cycle-stepped run on random tables."""
        gcfg = GuConfig()
        rng = np.random.default_rng(21)
        for _ in range(100):
            counts = rng.integers(0, 100, size=rng.integers(1, 16)).tolist()
            block = int(rng.integers(64, 8000))
            assert simulate_gu_stepped(counts, block, 32, gcfg) == gu_cycles(counts, block, 32, gcfg).total_cycles

    def test_two_samples_two_channels(self):
        """Test two samples of two channels take eight compute cycles."""
        assert compute_cycles(2, 2, GuConfig()) == 8


@pytest.mark.integration
class TestEnergy:
    """Test energy accounting on synthetic and measured traces."""

    def test_equal_volume_ratios(self):
        """Test random bytes cost three times streaming bytes and 25 times SRAM bytes."""
        em = EnergyModel()
        n = 400
        addresses = np.arange(n) * 64
        sequential = AccessTrace.from_columns(
            [constants.LEVEL_DRAM] * n, [constants.KIND_FEATURE] * n, addresses, [64] * n
        )
        scattered = AccessTrace.from_columns(
            [constants.LEVEL_DRAM] * n,
            [constants.KIND_FEATURE] * n,
            np.random.default_rng(0).permutation(n) * 8192,
            [64] * n,
            [constants.TAG_RANDOM] * n,
        )
        streaming = AccessTrace.from_columns(
            [constants.LEVEL_DRAM] * n, [constants.KIND_FEATURE] * n, addresses, [64] * n, [constants.TAG_STREAMING] * n
        )

        assert classify_trace(sequential).streaming_fraction == 1.0
        random_report = energy_report(scattered, 0, em)
        streaming_report = energy_report(streaming, 0, em)
        assert random_report.dram_bytes == streaming_report.dram_bytes
        assert random_report.dram_energy / streaming_report.dram_energy == pytest.approx(3.0, rel=1e-12)
        assert random_report.dram_energy / (random_report.dram_bytes * em.e_sram) == pytest.approx(25.0, rel=1e-12)

    def test_attribution_on_slab(self, intr64, cfg64):
        """Test savings from fewer and from streamed bytes add up to the total."""
        scene = build_synthetic_scene(preset_spec("slab", dims=32, channels=16))
        pose = orbit_trajectory(OrbitConfig(frames=1))[0]
        mgrid = partition_mvoxels(scene.grid, BUFFER_BYTES)
        origins, dirs = frame_rays(pose, intr64)
        em = EnergyModel()
        baseline = energy_report(trace_pixel_centric(scene, mgrid, origins, dirs, cfg64), 0, em)
        improved = energy_report(render_memory_centric(scene, mgrid, pose, intr64, cfg64).trace, 0, em)
        savings = attribute_savings(baseline, improved)

        assert baseline.dram_bytes > improved.dram_bytes
        parts = savings.traffic_reduction + savings.streaming_conversion + savings.sram_delta
        assert parts == pytest.approx(savings.total, rel=1e-9)
        assert savings.total == pytest.approx(baseline.total - improved.total, rel=1e-9)

    def test_remote_link(self):
        """Test one megabyte over the link costs 0.1 s and 0.1 J."""
        cost = remote_model(1_000_000, EnergyModel())

        assert cost.tx_latency_s == 0.1
        assert cost.tx_energy_j == 0.1


@pytest.mark.integration
class TestCacheOracle:
    """Test the optimal policy bounds LRU."""

    def test_belady_never_worse(self):
        """Test Belady misses no more than LRU on fifty random traces."""
        rng = np.random.default_rng(4)
        for _ in range(50):
            n = int(rng.integers(20, 400))
            span = int(rng.integers(8, 128))
            trace = AccessTrace.from_columns(
                [constants.LEVEL_DRAM] * n,
                [constants.KIND_FEATURE] * n,
                rng.integers(0, span, size=n) * 64,
                rng.integers(1, 200, size=n),
            )
            capacity = int(rng.integers(1, 32)) * 64
            lru = simulate_cache(trace, capacity, 64, constants.POLICY_LRU)
            belady = simulate_cache(trace, capacity, 64, constants.POLICY_BELADY)

            assert belady.accesses == lru.accesses
            assert belady.misses <= lru.misses


@pytest.mark.integration
class TestBaselines:
    """Test SpaRW against the comparison baselines."""

    def test_downsampled_empty_scene(self, intr64, cfg64):
        """Test DS-2 is exact when there is nothing to interpolate."""
        scene = build_synthetic_scene(preset_spec("empty", dims=16, channels=4))
        pose = orbit_trajectory(OrbitConfig(frames=1))[0]

        np.testing.assert_array_equal(
            render_downsampled(pose, intr64, scene, cfg64).color, render_frame(pose, intr64, scene, cfg64).color
        )

    def test_sparw_renders_a_small_share(self, scene32, intr64, cfg64):
        """Test SpaRW-16 renders under a quarter of the target pixels."""
        trajectory = orbit_trajectory(OrbitConfig(frames=16, step_deg=0.5))
        result = run_sequence(trajectory, scene32, cfg64, WarpConfig(window=16), intr64)

        assert result.nerf_fraction < 0.25
        for row in result.ledger:
            if row.kind == constants.FRAME_TARGET:
                assert row.warped_px + row.sparse_px + row.void_px == intr64.num_pixels

    def test_phi_sweep_trades_work_for_quality(self, scene32, intr64, cfg64):
        """Test a tighter threshold renders at least as many pixels."""
        trajectory = orbit_trajectory(OrbitConfig(frames=8, step_deg=1.0))
        fractions = [
            run_sequence(trajectory, scene32, cfg64, WarpConfig(window=8, phi_deg=phi), intr64).nerf_fraction
            for phi in (0.0, 0.5, 2.0, math.inf)
        ]

        assert fractions[0] > fractions[-1]
        assert all(a >= b for a, b in zip(fractions, fractions[1:]))


@pytest.mark.integration
@pytest.mark.slow
class TestQuality:
    """Test image quality over a longer trajectory."""

    @pytest.fixture(scope="class")
    def quality_run(self):
        scene = build_synthetic_scene(preset_spec("toy", dims=48, channels=16))
        intr = CameraIntrinsics.from_fov(96, 96, 30.0)
        cfg = RenderConfig(width=96, height=96, n_samples=64)
        trajectory = orbit_trajectory(OrbitConfig(frames=32, step_deg=0.5))
        full = [render_frame(pose, intr, scene, cfg) for pose in trajectory]
        return scene, intr, cfg, trajectory, full

    @staticmethod
    def _mean_psnr(frames, full) -> float:
        values = [psnr(a.color, b.color) for a, b in zip(frames, full)]
        return float(np.mean([v for v in values if math.isfinite(v)] or [math.inf]))

    def test_sparw_beats_temporal_warping(self, quality_run):
        """Test warping from extrapolated references beats warping from the previous output."""
        scene, intr, cfg, trajectory, full = quality_run
        sparw = run_sequence(trajectory, scene, cfg, WarpConfig(window=16), intr)
        temporal = run_temporal(trajectory, scene, cfg, WarpConfig(window=16), intr)

        assert self._mean_psnr(sparw.frames, full) > self._mean_psnr(temporal.frames, full)
        assert sparw.nerf_fraction < 0.25

    def test_longer_windows_do_not_improve(self, quality_run):
        """Test a window of one is at least as accurate as a window of sixteen."""
        scene, intr, cfg, trajectory, full = quality_run
        short = run_sequence(trajectory, scene, cfg, WarpConfig(window=1), intr)
        long = run_sequence(trajectory, scene, cfg, WarpConfig(window=16), intr)

        assert self._mean_psnr(short.frames, full) >= self._mean_psnr(long.frames, full)


@pytest.mark.integration
class TestReport:
    """Test the experiment report end to end."""

    def test_reports_are_deterministic(self, mock_config_file, temp_dir):
        """Test two runs with one seed write byte-identical tables."""
        cfg = ExperimentConfig.load(mock_config_file)
        first = run_experiment(replace(cfg, output_dir=str(temp_dir / "a")))
        second = run_experiment(replace(cfg, output_dir=str(temp_dir / "b")))

        for name in ("summary.csv", "ledger.csv", "trace_metrics.csv", "cycles_energy.csv"):
            assert (first / name).read_bytes() == (second / name).read_bytes()
