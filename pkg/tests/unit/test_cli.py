"""Unit tests for the command-line interface."""

from __future__ import annotations

import pandas as pd
import pytest

from warpstream.harness.cli import main
from warpstream.renderer import read_pfm, read_ppm


@pytest.fixture(autouse=True)
def _isolated_cwd(temp_dir, monkeypatch):
    monkeypatch.chdir(temp_dir)


class TestMain:
    """Test argument handling and exit codes."""

    def test_no_command(self, capsys):
        """Test running without a subcommand prints help and fails."""
        assert main([]) == 1
        assert "render" in capsys.readouterr().out

    def test_missing_config(self, temp_dir):
        """Test an explicit config path that does not exist."""
        assert main(["render", "-c", str(temp_dir / "nope.toml")]) == 1

    def test_invalid_size(self, mock_config_file):
        """Test images below the minimum size are rejected."""
        assert main(["render", "-c", str(mock_config_file), "--width", "8"]) == 1

    def test_pose_out_of_range(self, mock_config_file, temp_dir):
        """Test a pose index past the trajectory."""
        assert main(["render", "-c", str(mock_config_file), "-p", "99", "-o", str(temp_dir / "f.ppm")]) == 1


class TestRender:
    """Test the render command."""

    def test_render_frame_and_depth(self, mock_config_file, temp_dir, capsys):
        """Test a frame and depth map are written."""
        image = temp_dir / "out" / "frame.ppm"
        depth = temp_dir / "depth.pfm"
        code = main(["render", "-c", str(mock_config_file), "-o", str(image), "-d", str(depth)])

        assert code == 0
        assert read_ppm(image).shape == (16, 16, 3)
        assert read_pfm(depth).shape == (16, 16)
        assert "Frame:" in capsys.readouterr().out

    def test_render_downsampled(self, mock_config_file, temp_dir):
        """Test other render modes go through the experiment runner."""
        image = temp_dir / "ds.ppm"

        assert main(["render", "-c", str(mock_config_file), "-m", "downsample-2", "-o", str(image)]) == 0
        assert image.exists()

    def test_config_mode_is_used_without_flag(self, mock_config_file, temp_dir, capsys):
        """Test the mode from the config file applies when --mode is absent."""
        config = temp_dir / "mc.toml"
        config.write_text(mock_config_file.read_text().replace('mode = "sparw"', 'mode = "memory-centric"'))

        assert main(["render", "-c", str(config), "-o", str(temp_dir / "mc.ppm")]) == 0
        assert "memory-centric)" in capsys.readouterr().out

    def test_sequence_config_mode_renders_pixel_centric(self, mock_config_file, temp_dir, capsys):
        """Test a sequence mode in the config renders the single frame pixel-centric."""
        assert main(["render", "-c", str(mock_config_file), "-o", str(temp_dir / "pc.ppm")]) == 0
        assert "pixel-centric)" in capsys.readouterr().out

    def test_default_config_in_working_directory(self, mock_config_file, temp_dir):
        """Test ./warpstream.toml is picked up without -c."""
        image = temp_dir / "auto.ppm"

        assert main(["render", "-o", str(image)]) == 0
        assert read_ppm(image).shape == (16, 16, 3)


class TestSequenceCommands:
    """Test warp-seq, memsim and report."""

    def test_warp_seq(self, mock_config_file, temp_dir, capsys):
        """Test a SpaRW sequence writes frames and its ledger."""
        out = temp_dir / "seq"
        code = main(["warp-seq", "-c", str(mock_config_file), "-o", str(out), "--no-quality", "--window", "4"])
        ledger = pd.read_csv(out / "ledger.csv")

        assert code == 0
        assert list(ledger["frame"].astype(str)) == ["R0", "0", "1", "2", "3"]
        assert (out / "frames" / "frame_0002.ppm").exists()
        assert "NeRF pixel fraction" in capsys.readouterr().out

    def test_warp_seq_mode_from_config_and_flag(self, mock_config_file, temp_dir, capsys):
        """Test warp-seq keeps the config mode and --mode overrides it."""
        config = temp_dir / "temp.toml"
        config.write_text(mock_config_file.read_text().replace('mode = "sparw"', 'mode = "temp-warp"'))

        assert main(["warp-seq", "-c", str(config), "-o", str(temp_dir / "a"), "--no-quality"]) == 0
        assert "Mode: temp-warp" in capsys.readouterr().out
        assert main(["warp-seq", "-c", str(config), "-o", str(temp_dir / "b"), "--no-quality", "-m", "sparw"]) == 0
        assert "Mode: sparw" in capsys.readouterr().out

    def test_memsim_with_traces(self, mock_config_file, temp_dir):
        """Test memsim writes metrics and both traces."""
        out = temp_dir / "mem"

        assert main(["memsim", "-c", str(mock_config_file), "-o", str(out), "-t"]) == 0
        metrics = pd.read_csv(out / "trace_metrics.csv")
        assert "memory_centric_streaming_fraction" in set(metrics["metric"])
        assert (out / "pixel_centric_trace.csv").exists()
        assert (out / "memory_centric_trace.csv").exists()

    def test_report_with_phi_sweep(self, mock_config_file, temp_dir):
        """Test the report command and a phi sweep."""
        out = temp_dir / "rep"
        code = main(["report", "-c", str(mock_config_file), "-o", str(out), "--sweep-phi", "0,inf"])
        sweep = pd.read_csv(out / "phi_sweep.csv")

        assert code == 0
        assert (out / "summary.csv").exists()
        assert list(sweep.columns) == ["phi_deg", "mean_psnr", "sequence_psnr", "nerf_fraction", "references"]
        assert sweep.loc[0, "nerf_fraction"] >= sweep.loc[1, "nerf_fraction"]
