"""Pixel-centric NeRF inference over a dense feature grid."""

from .image_io import read_pfm, read_ppm, write_pfm, write_ppm
from .pipeline import (
    Frame,
    ProbeResult,
    RenderStats,
    SampleResult,
    SparseRender,
    composite,
    composite_batch,
    decode,
    decode_batch,
    decode_density,
    probe_depth,
    render_frame,
    render_rays,
    render_sparse,
)
from .sampling import RaySample, RenderError, gather_features, sample_ray

__all__ = [
    "Frame",
    "ProbeResult",
    "RaySample",
    "RenderError",
    "RenderStats",
    "SampleResult",
    "SparseRender",
    "composite",
    "composite_batch",
    "decode",
    "decode_batch",
    "decode_density",
    "gather_features",
    "probe_depth",
    "read_pfm",
    "read_ppm",
    "render_frame",
    "render_rays",
    "render_sparse",
    "sample_ray",
    "write_pfm",
    "write_ppm",
]
