"""Frame output: colour as binary PPM, depth as PFM with +inf stored as 3.4e38."""

from __future__ import annotations

from pathlib import Path
from typing import Tuple

import numpy as np
from PIL import Image

from .. import constants


def to_uint8(color: np.ndarray) -> np.ndarray:
    return np.round(np.clip(np.asarray(color, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)


def write_ppm(path: Path, color: np.ndarray) -> None:
    Image.fromarray(to_uint8(color)).save(Path(path), format="PPM")


def read_ppm(path: Path) -> np.ndarray:
    with Image.open(Path(path)) as img:
        return np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0


def write_pfm(path: Path, depth: np.ndarray) -> None:
    depth = np.asarray(depth, dtype=np.float64)
    height, width = depth.shape
    encoded = np.where(np.isfinite(depth), depth, constants.PFM_INF).astype("<f4")
    with Path(path).open("wb") as f:
        f.write(f"Pf\n{width} {height}\n-1.0\n".encode("ascii"))
        f.write(np.flipud(encoded).tobytes())


def _read_token(data: bytes, pos: int) -> Tuple[str, int]:
    while data[pos : pos + 1].isspace():
        pos += 1
    end = pos
    while end < len(data) and not data[end : end + 1].isspace():
        end += 1
    return data[pos:end].decode("ascii"), end + 1


def read_pfm(path: Path) -> np.ndarray:
    data = Path(path).read_bytes()
    magic, pos = _read_token(data, 0)
    if magic != "Pf":
        raise ValueError(f"{path}: not a greyscale PFM file")
    width, pos = _read_token(data, pos)
    height, pos = _read_token(data, pos)
    scale, pos = _read_token(data, pos)
    dtype = "<f4" if float(scale) < 0 else ">f4"
    values = np.frombuffer(data[pos:], dtype=dtype, count=int(width) * int(height))
    depth = np.flipud(values.reshape(int(height), int(width))).astype(np.float64)
    depth[depth >= np.float32(constants.PFM_INF)] = np.inf
    return depth
