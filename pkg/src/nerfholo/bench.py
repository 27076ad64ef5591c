"""Wall-clock timings of the numerical kernels. Reported, never asserted."""

from __future__ import annotations

import time

import numpy as np

from .cgh import DEFAULT_DISTANCE, DEFAULT_PITCH, RgbdFrame, SynthesisParams, synthesize
from .field import ComplexField, RealImage, fft2
from .propagation import PropagationParams, propagate

OPS = ("fft2", "propagate", "synthesize")
DEFAULT_SIZES = ((512, 512), (1024, 1024), (1920, 1080))


def parse_size(text: str) -> tuple[int, int]:
    """``"1920x1080"`` -> ``(1920, 1080)`` (width, height)."""
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise ValueError(f"size must look like WIDTHxHEIGHT, got {text!r}") from None
    if w < 2 or h < 2:
        raise ValueError(f"size {text!r} is too small")
    return w, h


def _workload(op: str, width: int, height: int, rng: np.random.Generator, n_layers: int):
    if op == "fft2":
        f = ComplexField(rng.normal(size=(height, width)) + 1j * rng.normal(size=(height, width)), DEFAULT_PITCH)
        return lambda: fft2(f)
    if op == "propagate":
        f = ComplexField(rng.normal(size=(height, width)) + 1j * rng.normal(size=(height, width)), DEFAULT_PITCH)
        params = PropagationParams(532e-9, DEFAULT_DISTANCE, DEFAULT_PITCH)
        return lambda: propagate(f, params)
    if op == "synthesize":
        rgb = RealImage(rng.uniform(size=(height, width, 3)))
        depth = RealImage(rng.uniform(1.0, 3.0, size=(height, width)))
        frame = RgbdFrame(rgb, depth, 1.0, 4.0)
        params = SynthesisParams(phase="constant")
        return lambda: synthesize(frame, n_layers, params)
    raise ValueError(f"unknown op {op!r}; choose from {OPS}")


def run_bench(ops=OPS, sizes=DEFAULT_SIZES, repeat: int = 3, n_layers: int = 4, seed: int = 0) -> list[dict]:
    """One row per ``(op, size)`` with the best and median of ``repeat`` timed runs.

    The first call of each workload is an untimed warm-up (transfer-function caches, FFT plans).
    """
    if repeat < 1:
        raise ValueError(f"repeat must be >= 1, got {repeat}")
    rng = np.random.default_rng(seed)
    rows = []
    for op in ops:
        for w, h in sizes:
            fn = _workload(op, w, h, rng, n_layers)
            fn()
            times = []
            for _ in range(repeat):
                t0 = time.perf_counter()
                fn()
                times.append(time.perf_counter() - t0)
            rows.append({"op": op, "width": w, "height": h, "repeat": repeat,
                         "best_s": min(times), "median_s": float(np.median(times))})
    return rows


def format_table(rows: list[dict]) -> str:
    """Tab-separated table with a header line."""
    cols = ("op", "width", "height", "repeat", "best_s", "median_s")
    lines = ["\t".join(cols)]
    for r in rows:
        lines.append("\t".join(f"{r[c]:.6f}" if isinstance(r[c], float) else str(r[c]) for c in cols))
    return "\n".join(lines)
