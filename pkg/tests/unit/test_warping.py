"""Unit tests for radiance warping and hole classification."""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from warpstream import constants
from warpstream.config import WarpConfig
from warpstream.geometry import CameraIntrinsics, Pose
from warpstream.renderer import Frame, probe_depth, render_frame
from warpstream.scene import build_synthetic_scene, preset_spec
from warpstream.scene.synthetic import MLP_RANDOM
from warpstream.sparw import apply_phi, classify_holes, render_target, warp


def _flat_frame(depth_value: float, size: int = 8) -> Frame:
    intr = CameraIntrinsics.from_fov(size, size, 40.0)
    color = np.random.default_rng(0).uniform(size=(size, size, 3)).astype(np.float32)
    depth = np.full((size, size), depth_value)
    return Frame(color, depth, np.ones((size, size), dtype=np.float32), Pose.identity(), intr)


class TestWarp:
    """Test forward splatting."""

    def test_identity_warp_is_exact(self, toy_scene, intr, render_cfg, front_pose):
        """Test warping to the reference pose reproduces it bit for bit."""
        ref = render_frame(front_pose, intr, toy_scene, render_cfg)
        result = warp(ref, front_pose, intr)
        finite = np.isfinite(ref.depth)

        assert finite.any()
        np.testing.assert_array_equal(result.color[finite], ref.color[finite])
        np.testing.assert_array_equal(result.valid, finite)
        assert np.all(result.source[finite] == np.flatnonzero(finite.ravel()))

    def test_unwarped_pixels_are_holes(self):
        """Test infinite-depth reference pixels leave holes."""
        ref = _flat_frame(2.0)
        ref.depth[0, :] = np.inf
        result = warp(ref, ref.pose, ref.intr)

        assert not result.valid[0].any()
        assert np.all(result.hole_kind[0] == constants.HOLE_DISOCCLUDED)
        assert np.all(np.isinf(result.depth[0]))
        assert np.all(result.color[0] == 0.0)

    def test_points_behind_camera_dropped(self):
        """Test a target looking away receives nothing."""
        ref = _flat_frame(2.0)
        away = Pose(np.diag([-1.0, 1.0, -1.0]), np.zeros(3))
        result = warp(ref, away, ref.intr)

        assert not result.valid.any()
        assert result.dropped_behind == ref.intr.num_pixels

    def test_nearest_depth_wins(self):
        """Test the z-buffer keeps the nearer of two colliding splats."""
        ref = _flat_frame(4.0, size=8)
        ref.depth[:, :] = np.inf
        ref.depth[3, 3] = 4.0
        ref.depth[3, 4] = 2.0
        # Moving 4/f sideways lands both points on target pixel (2, 3)
        tgt = Pose(np.eye(3), [4.0 / ref.intr.f, 0.0, 0.0])
        result = warp(ref, tgt, ref.intr)

        assert np.argwhere(result.valid).tolist() == [[3, 2]]
        assert result.depth[3, 2] == pytest.approx(2.0)
        np.testing.assert_array_equal(result.color[3, 2], ref.color[3, 4])
        assert result.source[3, 2] == 3 * 8 + 4

    def test_angles_zero_for_identity(self):
        """Test ray angles vanish when the camera does not move."""
        ref = _flat_frame(3.0)
        result = warp(ref, ref.pose, ref.intr)

        np.testing.assert_allclose(result.angles[result.valid], 0.0, atol=1e-7)


class TestHoles:
    """Test hole classification and the warp threshold."""

    def test_classify_with_projected_depth(self):
        """Test finite projected depth marks disocclusions, infinite marks void."""
        ref = _flat_frame(2.0, size=4)
        ref.depth[0, 0] = np.inf
        ref.depth[0, 1] = np.inf
        result = warp(ref, ref.pose, ref.intr)
        projected = np.full((4, 4), 2.0)
        projected[0, 1] = np.inf
        holes = classify_holes(result, projected)

        assert holes.disoccluded[0, 0]
        assert holes.void[0, 1]
        assert holes.disoccluded.sum() == 1
        assert holes.void.sum() == 1

    def test_classify_without_projection(self):
        """Test every hole is disoccluded without a projected depth."""
        ref = _flat_frame(2.0, size=4)
        ref.depth[1, :] = np.inf
        holes = classify_holes(warp(ref, ref.pose, ref.intr), None)

        assert holes.disoccluded.sum() == 4
        assert not holes.void.any()

    def test_phi_zero_demotes_everything(self):
        """Test phi = 0 turns every warped pixel into a disocclusion."""
        ref = _flat_frame(2.0, size=4)
        result = apply_phi(warp(ref, ref.pose, ref.intr), 0.0)

        assert not result.valid.any()
        assert result.disoccluded.all()
        assert np.all(np.isinf(result.depth))

    def test_phi_infinite_is_a_no_op(self):
        """Test an infinite threshold keeps the warp."""
        ref = _flat_frame(2.0, size=4)
        warped = warp(ref, ref.pose, ref.intr)

        assert apply_phi(warped, math.inf) is warped

    def test_phi_threshold(self):
        """Test pixels above the threshold are demoted and the rest kept."""
        ref = _flat_frame(2.0, size=4)
        warped = warp(ref, ref.pose, ref.intr)
        angles = np.zeros((4, 4))
        angles[2, 2] = 0.3
        warped = replace(warped, angles=angles)
        result = apply_phi(warped, 0.1)

        assert not result.valid[2, 2]
        assert result.valid.sum() == 15


class TestRenderTarget:
    """Test target frame composition."""

    def test_pixel_accounting(self, toy_scene, intr, render_cfg, orbit):
        """Test warped, sparse and void pixels partition the frame."""
        ref = render_frame(orbit[0], intr, toy_scene, render_cfg)
        result = render_target(ref, orbit[3], intr, toy_scene, render_cfg)

        assert result.warped_px + result.sparse_px + result.void_px == intr.num_pixels
        assert result.warped_px > result.sparse_px
        assert result.nerf_fraction == result.sparse_px / intr.num_pixels

    def test_sparse_pixels_match_full_render(self, toy_scene, intr, render_cfg, orbit):
        """Test re-rendered pixels equal the full frame exactly."""
        ref = render_frame(orbit[0], intr, toy_scene, render_cfg)
        full = render_frame(orbit[2], intr, toy_scene, render_cfg)
        result = render_target(ref, orbit[2], intr, toy_scene, render_cfg)
        rendered = result.warp.disoccluded

        np.testing.assert_array_equal(result.frame.color[rendered], full.color[rendered])

    def test_void_pixels_show_background(self, intr, render_cfg, orbit):
        """Test void pixels get the background and infinite depth."""
        scene = build_synthetic_scene(preset_spec("sphere", dims=16, channels=8))
        cfg = replace(render_cfg, background=(1.0, 0.0, 1.0))
        ref = render_frame(orbit[0], intr, scene, cfg)
        probe = probe_depth(orbit[1], intr, scene, cfg)
        result = render_target(ref, orbit[1], intr, scene, cfg, probe=probe)
        void = result.warp.void

        assert void.any()
        assert result.void_px == int(void.sum())
        assert np.all(np.isinf(result.frame.depth[void]))
        magenta = np.broadcast_to(np.float32([1, 0, 1]), (int(void.sum()), 3))
        np.testing.assert_array_equal(result.frame.color[void], magenta)
        np.testing.assert_array_equal(result.frame.opacity[void], probe.opacity[void])

    def test_phi_zero_equals_full_render(self, toy_scene, intr, render_cfg, orbit):
        """Test a zero threshold re-renders every pixel."""
        ref = render_frame(orbit[0], intr, toy_scene, render_cfg)
        full = render_frame(orbit[4], intr, toy_scene, render_cfg)
        result = render_target(ref, orbit[4], intr, toy_scene, render_cfg, WarpConfig(phi_deg=0.0))

        assert result.warped_px == 0
        np.testing.assert_array_equal(result.frame.color, full.color)
        np.testing.assert_array_equal(result.frame.depth, full.depth)

    def test_random_decoder_splits_void_from_disoccluded(self, random_mlp_scene, intr, render_cfg, orbit):
        """Test a learned decoder's holes are split by its own density-only depth."""
        ref = render_frame(orbit[0], intr, random_mlp_scene, render_cfg)
        probe = probe_depth(orbit[1], intr, random_mlp_scene, render_cfg)
        result = render_target(ref, orbit[1], intr, random_mlp_scene, render_cfg)
        unwarped = ~result.warp.valid

        np.testing.assert_array_equal(result.warp.void, unwarped & np.isinf(probe.depth))
        np.testing.assert_array_equal(result.warp.disoccluded, unwarped & np.isfinite(probe.depth))
        assert result.warped_px + result.sparse_px + result.void_px == intr.num_pixels

    def test_void_pixels_are_empty_in_full_render(self, intr, render_cfg, orbit):
        """Test pixels classified void carry no depth in the full render of a learned decoder."""
        spec = replace(preset_spec("sphere", dims=16, channels=8), mlp_kind=MLP_RANDOM, mlp_hidden=8, mlp_seed=5)
        scene = build_synthetic_scene(spec)
        ref = render_frame(orbit[0], intr, scene, render_cfg)
        full = render_frame(orbit[1], intr, scene, render_cfg)
        result = render_target(ref, orbit[1], intr, scene, render_cfg)

        assert np.all(np.isinf(full.depth[result.warp.void]))
