from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EncodingConfig:
    frequencies: int = 6
    include_identity: bool = True

    def __post_init__(self):
        if self.frequencies < 0:
            raise ValueError(f"frequency count must be >= 0, got {self.frequencies}")

    def output_dim(self, input_dim: int) -> int:
        return input_dim * (2 * self.frequencies + int(self.include_identity))


def positional_encode(p: np.ndarray, cfg: EncodingConfig = EncodingConfig()) -> np.ndarray:
    """Sinusoidal lift of coordinates in [-1, 1].

    For ``p`` of shape ``(..., D)`` returns ``(..., D * (2L + identity))`` laid out as
    ``[p, sin(pi p), cos(pi p), sin(2 pi p), cos(2 pi p), ...]`` (identity block optional).
    """
    p = np.asarray(p, dtype=np.float64)
    parts = [p] if cfg.include_identity else []
    for k in range(cfg.frequencies):
        arg = (2.0**k) * np.pi * p
        parts.append(np.sin(arg))
        parts.append(np.cos(arg))
    if not parts:
        return np.zeros(p.shape[:-1] + (0,))
    return np.concatenate(parts, axis=-1)
