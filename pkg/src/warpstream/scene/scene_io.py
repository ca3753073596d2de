"""
Scene files: a UTF-8 key:value header followed by a little-endian float16
payload (grid features in vertex order, then MLP w1, b1, w2, b2).
"""

from __future__ import annotations

import logging
import zlib
from pathlib import Path
from typing import Dict

import numpy as np

from .. import constants
from ..logging_utils import log_structured
from .errors import SceneFormatError
from .grid import FeatureGrid, Scene
from .mlp import MlpWeights

logger = logging.getLogger(__name__)

MAGIC = "WARPSTREAM-SCENE"
FORMAT_VERSION = 1
OFFSET_WIDTH = 12
HEADER_END = "end_header"


def _render_header(scene: Scene, payload_offset: int, crc: int) -> str:
    if not scene.name.isprintable():
        raise SceneFormatError(f"scene name {scene.name!r} cannot be written to a header line")
    grid = scene.grid
    lines = [
        f"{MAGIC} {FORMAT_VERSION}",
        f"name: {scene.name}",
        f"dims: {grid.dims[0]} {grid.dims[1]} {grid.dims[2]}",
        "bbox_min: " + " ".join(f"{v:.17g}" for v in grid.bbox_min),
        "bbox_max: " + " ".join(f"{v:.17g}" for v in grid.bbox_max),
        f"channels: {grid.channels}",
        f"mlp_hidden: {scene.mlp.hidden}",
        "feature_dtype: float16",
        f"payload_offset: {payload_offset:0{OFFSET_WIDTH}d}",
        f"payload_crc32: {crc:08x}",
        HEADER_END,
    ]
    return "\n".join(lines) + "\n"


def save_scene(scene: Scene, path: Path) -> int:
    """Write `scene` to `path`; returns the file size in bytes."""
    payload = scene.grid.features.astype("<f2").tobytes() + scene.mlp.to_payload()
    crc = zlib.crc32(payload)
    header_len = len(_render_header(scene, 0, crc).encode("utf-8"))
    header = _render_header(scene, header_len, crc).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as f:
        f.write(header)
        f.write(payload)
    size = len(header) + len(payload)
    log_structured(logger, "Saved scene", {constants.LOG_KEY_PATH: str(path), "BYTES": size}, level=logging.DEBUG)
    return size


def _parse_header(raw: bytes) -> Dict[str, str]:
    end_marker = ("\n" + HEADER_END + "\n").encode("utf-8")
    end = raw.find(end_marker)
    if end < 0:
        raise SceneFormatError("scene header is not terminated")
    try:
        text = raw[: end + 1].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise SceneFormatError("scene header is not UTF-8") from exc
    lines = text.splitlines()
    if not lines or lines[0].split()[:1] != [MAGIC]:
        raise SceneFormatError("bad magic: not a scene file")
    if lines[0].split()[1:] != [str(FORMAT_VERSION)]:
        raise SceneFormatError(f"unsupported scene format version: {lines[0]!r}")
    fields: Dict[str, str] = {}
    for line in lines[1:]:
        key, sep, value = line.partition(":")
        if not sep:
            raise SceneFormatError(f"malformed header line: {line!r}")
        fields[key.strip()] = value.strip()
    return fields


def load_scene(path: Path) -> Scene:
    path = Path(path)
    raw = path.read_bytes()
    fields = _parse_header(raw)
    try:
        dims = tuple(int(v) for v in fields["dims"].split())
        bbox_min = [float(v) for v in fields["bbox_min"].split()]
        bbox_max = [float(v) for v in fields["bbox_max"].split()]
        channels = int(fields["channels"])
        hidden = int(fields["mlp_hidden"])
        offset = int(fields["payload_offset"])
        crc = int(fields["payload_crc32"], 16)
    except (KeyError, ValueError) as exc:
        raise SceneFormatError(f"malformed scene header: {exc}") from exc
    if fields.get("feature_dtype") != "float16":
        raise SceneFormatError(f"unsupported feature dtype: {fields.get('feature_dtype')!r}")
    if len(dims) != 3:
        raise SceneFormatError(f"dims needs 3 values, got {len(dims)}")

    feature_bytes = int(np.prod(dims)) * channels * constants.FP16_BYTES
    mlp_bytes = (hidden * channels + hidden + 4 * hidden + 4) * constants.FP16_BYTES
    payload = raw[offset:]
    if len(payload) < feature_bytes + mlp_bytes:
        raise SceneFormatError(
            f"truncated payload: {len(payload)} bytes, expected {feature_bytes + mlp_bytes}"
        )
    if len(payload) > feature_bytes + mlp_bytes:
        raise SceneFormatError("trailing bytes after scene payload")
    if zlib.crc32(payload) != crc:
        raise SceneFormatError("payload checksum mismatch")

    features = np.frombuffer(payload[:feature_bytes], dtype="<f2").reshape(dims + (channels,))
    grid = FeatureGrid(dims, bbox_min, bbox_max, features.astype(np.float16))  # type: ignore[arg-type]
    mlp = MlpWeights.from_payload(payload[feature_bytes:], channels, hidden)
    return Scene(grid=grid, mlp=mlp, name=fields.get("name", path.stem))
