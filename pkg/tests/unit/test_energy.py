"""Unit tests for energy accounting and the modeled execution variants."""

from __future__ import annotations

import math

import numpy as np
import pytest

from warpstream import constants
from warpstream.config import EnergyModel, GuConfig, MemoryConfig
from warpstream.memsim import (
    AccessTrace,
    FrameCosts,
    attribute_savings,
    classify_trace,
    energy_report,
    measure_frame_costs,
    model_variants,
    remote_model,
)
from warpstream.memsim.energy import EnergyReport
from warpstream.memsim.variants import VARIANTS, Cost
from warpstream.scene import partition_mvoxels


def _tagged(level, tag, n, size=64) -> AccessTrace:
    return AccessTrace.from_columns(
        [level] * n, [constants.KIND_FEATURE] * n, np.arange(n) * 4096, [size] * n, [tag] * n
    )


class TestEnergyModel:
    """Test per-byte energy parameters."""

    def test_ratios(self):
        """Test random:streaming is 3:1 and random:SRAM is 25:1."""
        em = EnergyModel(e_sram=2.0)

        assert em.e_dram_random / em.e_dram_stream == pytest.approx(3.0, rel=1e-12)
        assert em.e_dram_random / em.e_sram == 25.0

    def test_equal_volume_conversion(self):
        """Test turning random bytes into streaming ones cuts DRAM energy threefold."""
        em = EnergyModel()
        random = energy_report(_tagged(constants.LEVEL_DRAM, constants.TAG_RANDOM, 50), 0, em)
        streaming = energy_report(_tagged(constants.LEVEL_DRAM, constants.TAG_STREAMING, 50), 0, em)

        assert random.dram_bytes == streaming.dram_bytes == 3200
        assert random.dram_energy / streaming.dram_energy == pytest.approx(3.0, rel=1e-12)
        assert random.dram_energy / (3200 * em.e_sram) == pytest.approx(25.0, rel=1e-12)

    def test_sram_bytes(self):
        """Test on-chip bytes cost one unit each."""
        report = energy_report(_tagged(constants.LEVEL_SRAM, constants.TAG_RANDOM, 10, size=16), 42, EnergyModel())

        assert report.sram_energy == 160.0
        assert report.dram_bytes == 0
        assert report.total == 160.0
        assert report.cycles == 42
        assert report.as_dict()["total_energy"] == 160.0

    def test_untagged_traces_are_classified(self):
        """Test energy_report prices a fresh trace without tagging it."""
        trace = AccessTrace.from_columns(
            [constants.LEVEL_DRAM] * 3, [constants.KIND_FEATURE] * 3, [0, 64, 128], [64] * 3
        )
        report = energy_report(trace, 0, EnergyModel())

        assert report.dram_streaming_bytes == 128
        assert report.dram_random_bytes == 64
        assert np.all(trace.tag == constants.TAG_UNCLASSIFIED)


class TestAdditivity:
    """Test energy adds up over traces joined end to end."""

    @staticmethod
    def _random_trace(rng) -> AccessTrace:
        n = int(rng.integers(1, 40))
        level = rng.choice([constants.LEVEL_DRAM, constants.LEVEL_SRAM], size=n)
        kind = rng.choice([constants.KIND_FEATURE, constants.KIND_WEIGHTS], size=n)
        address = np.cumsum(rng.choice([0, 64, 4096], size=n)) + rng.integers(0, 1 << 20)
        size = rng.choice([16, 64, 2048], size=n)
        return AccessTrace.from_columns(level, kind, address, size)

    @pytest.mark.parametrize("seed", range(10))
    def test_tagged_traces_add_up(self, seed):
        """Test classified halves price the same as the joined trace."""
        rng = np.random.default_rng(seed)
        em = EnergyModel()
        a, b = self._random_trace(rng), self._random_trace(rng)
        classify_trace(a)
        classify_trace(b)
        joined = energy_report(a.concat(b), 0, em)
        parts = [energy_report(a, 0, em), energy_report(b, 0, em)]

        assert joined.dram_streaming_bytes == sum(p.dram_streaming_bytes for p in parts)
        assert joined.dram_random_bytes == sum(p.dram_random_bytes for p in parts)
        assert joined.sram_bytes == sum(p.sram_bytes for p in parts)
        assert joined.total == pytest.approx(sum(p.total for p in parts), rel=1e-12)

    def test_joined_trace_tags_once(self):
        """Test an untagged sequential run tags its split point once when joined."""
        em = EnergyModel()
        a = AccessTrace.from_columns([constants.LEVEL_DRAM] * 3, [constants.KIND_FEATURE] * 3, [0, 64, 128], [64] * 3)
        b = AccessTrace.from_columns(
            [constants.LEVEL_DRAM] * 3, [constants.KIND_FEATURE] * 3, [192, 256, 320], [64] * 3
        )
        joined = a.concat(b)
        before = joined.tag.copy()
        report = energy_report(joined, 0, em)

        assert report.dram_random_bytes == 64
        assert report.dram_streaming_bytes == 320
        np.testing.assert_array_equal(joined.tag, before)

        classify_trace(joined)
        tagged_a = AccessTrace.from_columns(a.level, a.kind, a.address, a.size, joined.tag[:3])
        tagged_b = AccessTrace.from_columns(b.level, b.kind, b.address, b.size, joined.tag[3:])
        parts = energy_report(tagged_a, 0, em).total + energy_report(tagged_b, 0, em).total
        assert parts == pytest.approx(energy_report(joined, 0, em).total, rel=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_split_of_a_tagged_trace_adds_up(self, seed):
        """Test any split point of a classified trace preserves total energy."""
        rng = np.random.default_rng(100 + seed)
        em = EnergyModel()
        trace = self._random_trace(rng)
        classify_trace(trace)
        cut = int(rng.integers(0, len(trace) + 1))
        head = AccessTrace.from_columns(
            trace.level[:cut], trace.kind[:cut], trace.address[:cut], trace.size[:cut], trace.tag[:cut]
        )
        tail = AccessTrace.from_columns(
            trace.level[cut:], trace.kind[cut:], trace.address[cut:], trace.size[cut:], trace.tag[cut:]
        )
        whole = energy_report(trace, 0, em)

        assert energy_report(head, 0, em).total + energy_report(tail, 0, em).total == pytest.approx(
            whole.total, rel=1e-12
        )


class TestAttribution:
    """Test the split of energy savings."""

    def test_parts_sum_to_total(self):
        """Test traffic, conversion and SRAM parts add up."""
        em = EnergyModel()
        baseline = EnergyReport(0, 1000, 100, 0.0, 1000 * em.e_dram_random, 100.0)
        improved = EnergyReport(400, 0, 300, 400 * em.e_dram_stream, 0.0, 300.0)
        savings = attribute_savings(baseline, improved)

        assert savings.traffic_reduction == pytest.approx(600 * em.e_dram_random)
        assert savings.streaming_conversion == pytest.approx(400 * (em.e_dram_random - em.e_dram_stream))
        assert savings.sram_delta == -200.0
        assert savings.traffic_reduction + savings.streaming_conversion + savings.sram_delta == pytest.approx(
            savings.total
        )
        assert 0.0 < savings.traffic_share < 1.0

    def test_no_baseline_traffic(self):
        """Test an all-SRAM baseline attributes nothing to DRAM."""
        baseline = EnergyReport(0, 0, 100, 0.0, 0.0, 100.0)
        savings = attribute_savings(baseline, baseline)

        assert savings.total == 0.0
        assert savings.traffic_share == 0.0


class TestRemoteModel:
    """Test the wireless link."""

    def test_one_megabyte(self):
        """Test 1 MB takes 0.1 s and 0.1 J."""
        cost = remote_model(1_000_000, EnergyModel())

        assert cost.tx_latency_s == 0.1
        assert cost.tx_energy_j == 0.1

    def test_scales_linearly(self):
        """Test twice the bytes cost twice as much."""
        em = EnergyModel()

        assert remote_model(2000, em).tx_energy_j == pytest.approx(2 * remote_model(1000, em).tx_energy_j)


def _costs() -> FrameCosts:
    return FrameCosts(
        pixels=100,
        reference_bytes=7000,
        pixel_centric=Cost(1000.0, 1000.0),
        streaming=Cost(600.0, 400.0),
        full=Cost(300.0, 400.0),
        warp=Cost(10.0, 5.0),
        details={},
    )


class TestVariants:
    """Test the first-order sequence pricing."""

    def test_rows_and_baseline(self):
        """Test one row per scenario and variant, baseline normalized to one."""
        rows = model_variants(_costs(), [0.1] * 8, 1, GuConfig(), EnergyModel())
        baselines = [r for r in rows if r.variant == "baseline"]

        assert len(rows) == 2 * len(VARIANTS)
        assert all(r.modeled for r in rows)
        assert all(r.speedup == 1.0 and r.normalized_energy == 1.0 for r in baselines)

    def test_local_ordering(self):
        """Test each added technique speeds the local scenario up."""
        rows = model_variants(_costs(), [0.1] * 8, 1, GuConfig(), EnergyModel())
        local = {r.variant: r for r in rows if r.scenario == "local"}

        assert local["baseline"].speedup < local["sparw"].speedup < local["sparw+fs"].speedup < local["full"].speedup
        assert local["full"].seconds == pytest.approx((300.0 + 8 * 110.0) / 1e9)
        assert local["sparw"].energy_j == pytest.approx((1000.0 + 8 * 105.0) * 1e-12)

    def test_remote_pays_the_link(self):
        """Test the baseline ships every frame and SpaRW one reference."""
        em = EnergyModel()
        rows = model_variants(_costs(), [0.1] * 8, 1, GuConfig(), em)
        remote = {r.variant: r for r in rows if r.scenario == "remote"}
        link = remote_model(7000, em)

        assert remote["baseline"].energy_j == pytest.approx(8 * link.tx_energy_j)
        assert remote["baseline"].seconds == pytest.approx(8000.0 / 1e9 + 8 * link.tx_latency_s)
        assert remote["sparw"].seconds == pytest.approx(max(1000.0 / 1e9 + link.tx_latency_s, 880.0 / 1e9))
        assert remote["sparw"].speedup > 1.0

    def test_reference_cost_per_variant(self):
        """Test which full-frame cost each variant pays for references."""
        costs = _costs()

        assert costs.reference_cost("sparw") is costs.pixel_centric
        assert costs.reference_cost("sparw+fs") is costs.streaming
        assert costs.reference_cost("full") is costs.full

    def test_measured_costs(self, toy_scene, intr, render_cfg, front_pose):
        """Test costs measured on a real frame are consistent."""
        mgrid = partition_mvoxels(toy_scene.grid, 32768)
        costs = measure_frame_costs(
            toy_scene, mgrid, front_pose, intr, render_cfg, GuConfig(), MemoryConfig(), EnergyModel()
        )

        assert costs.pixels == intr.num_pixels
        assert costs.reference_bytes == intr.num_pixels * 7
        assert costs.details["pixel_centric_dram_bytes"] > costs.details["memory_centric_dram_bytes"]
        assert 0.0 <= costs.details["feature_major_conflict_rate"] <= 1.0
        assert costs.full.cycles > costs.details["mac_cycles"]
        assert not math.isnan(costs.pixel_centric.energy)
