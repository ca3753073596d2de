from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import List, Tuple

import numpy as np

from .errors import SceneConfigError, SceneFormatError

OUTPUT_DIM = 4  # density logit, r, g, b


def _fp16_exact(values: np.ndarray) -> np.ndarray:
    return np.asarray(values, dtype=np.float16).astype(np.float32)


@dataclass(frozen=True, eq=False)
class MlpWeights:
    """Two dense layers, C -> H -> 4, with weights quantized to float16 at rest."""

    w1: np.ndarray  # (H, C)
    b1: np.ndarray  # (H,)
    w2: np.ndarray  # (4, H)
    b2: np.ndarray  # (4,)

    def __post_init__(self) -> None:
        w1 = _fp16_exact(self.w1)
        b1 = _fp16_exact(self.b1).reshape(-1)
        w2 = _fp16_exact(self.w2)
        b2 = _fp16_exact(self.b2).reshape(-1)
        if w1.ndim != 2 or w2.shape != (OUTPUT_DIM, w1.shape[0]):
            raise SceneConfigError(f"MLP layer shapes disagree: w1 {w1.shape}, w2 {w2.shape}")
        if b1.shape != (w1.shape[0],) or b2.shape != (OUTPUT_DIM,):
            raise SceneConfigError("MLP bias shapes disagree with layer widths")
        for name, value in (("w1", w1), ("b1", b1), ("w2", w2), ("b2", b2)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @classmethod
    def identity(cls, channels: int) -> "MlpWeights":
        """Exact pass-through of channels 0..3 via relu(x) - relu(-x)."""
        hidden = 2 * OUTPUT_DIM
        w1 = np.zeros((hidden, channels), dtype=np.float32)
        w2 = np.zeros((OUTPUT_DIM, hidden), dtype=np.float32)
        for j in range(OUTPUT_DIM):
            w1[j, j] = 1.0
            w1[OUTPUT_DIM + j, j] = -1.0
            w2[j, j] = 1.0
            w2[j, OUTPUT_DIM + j] = -1.0
        return cls(w1, np.zeros(hidden), w2, np.zeros(OUTPUT_DIM))

    @classmethod
    def zeros(cls, channels: int, hidden: int = 8) -> "MlpWeights":
        return cls(
            np.zeros((hidden, channels)), np.zeros(hidden), np.zeros((OUTPUT_DIM, hidden)), np.zeros(OUTPUT_DIM)
        )

    @classmethod
    def random(cls, channels: int, hidden: int = 16, seed: int = 0, scale: float = 1.0) -> "MlpWeights":
        rng = np.random.default_rng(seed)
        return cls(
            rng.normal(0.0, scale / np.sqrt(channels), (hidden, channels)),
            rng.normal(0.0, 0.1 * scale, hidden),
            rng.normal(0.0, scale / np.sqrt(hidden), (OUTPUT_DIM, hidden)),
            rng.normal(0.0, 0.1 * scale, OUTPUT_DIM),
        )

    @property
    def in_channels(self) -> int:
        return int(self.w1.shape[1])

    @property
    def hidden(self) -> int:
        return int(self.w1.shape[0])

    @cached_property
    def is_identity(self) -> bool:
        ident = MlpWeights.identity(self.in_channels)
        return all(
            a.shape == b.shape and np.array_equal(a, b)
            for a, b in ((self.w1, ident.w1), (self.b1, ident.b1), (self.w2, ident.w2), (self.b2, ident.b2))
        )

    @cached_property
    def active_channels(self) -> Tuple[int, ...]:
        """Input channels with at least one non-zero first-layer weight."""
        return tuple(int(c) for c in np.flatnonzero(np.any(self.w1 != 0, axis=0)))

    def layer_dims(self) -> List[Tuple[int, int]]:
        return [(self.in_channels, self.hidden), (self.hidden, OUTPUT_DIM)]

    @property
    def macs_per_sample(self) -> int:
        return sum(i * o for i, o in self.layer_dims())

    @property
    def nbytes(self) -> int:
        return 2 * sum(a.size for a in (self.w1, self.b1, self.w2, self.b2))

    def to_payload(self) -> bytes:
        parts = [a.astype("<f2").tobytes() for a in (self.w1, self.b1, self.w2, self.b2)]
        return b"".join(parts)

    @classmethod
    def from_payload(cls, payload: bytes, channels: int, hidden: int) -> "MlpWeights":
        values = np.frombuffer(payload, dtype="<f2").astype(np.float32)
        sizes = [hidden * channels, hidden, OUTPUT_DIM * hidden, OUTPUT_DIM]
        if values.size != sum(sizes):
            raise SceneFormatError(f"MLP payload holds {values.size} values, expected {sum(sizes)}")
        offsets = np.cumsum([0] + sizes)
        w1, b1, w2, b2 = (values[offsets[i] : offsets[i + 1]] for i in range(4))
        return cls(w1.reshape(hidden, channels), b1, w2.reshape(OUTPUT_DIM, hidden), b2)
