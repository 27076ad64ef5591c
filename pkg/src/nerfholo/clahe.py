"""Contrast-limited adaptive histogram equalization on [0, 1] images."""

from __future__ import annotations

import math

import numpy as np

from .field import RealImage


def _tile_edges(n: int, tiles: int) -> np.ndarray:
    return np.round(np.linspace(0, n, tiles + 1)).astype(int)


def tile_mappings(values: np.ndarray, tiles: tuple[int, int], clip_limit: float, bins: int):
    """Per-tile lookup tables.

    Returns ``(luts, identity, edges_y, edges_x)``: ``luts[ty, tx, b]`` maps bin ``b`` to its
    equalized value, ``identity[ty, tx]`` marks tiles whose histogram holds a single bin.
    """
    tx, ty = tiles
    h, w = values.shape
    bin_idx = np.minimum((values * bins).astype(np.int64), bins - 1)
    ey, ex = _tile_edges(h, ty), _tile_edges(w, tx)
    luts = np.zeros((ty, tx, bins))
    identity = np.zeros((ty, tx), bool)
    for j in range(ty):
        for i in range(tx):
            block = bin_idx[ey[j]:ey[j + 1], ex[i]:ex[i + 1]]
            hist = np.bincount(block.ravel(), minlength=bins).astype(np.float64)
            if np.count_nonzero(hist) <= 1:
                identity[j, i] = True
                continue
            if math.isfinite(clip_limit):
                ceiling = clip_limit * block.size / bins
                excess = np.sum(np.maximum(hist - ceiling, 0.0))
                hist = np.minimum(hist, ceiling) + excess / bins
            cdf = np.cumsum(hist)
            luts[j, i] = cdf / cdf[-1]
    return luts, identity, ey, ex


def _interp_axis(n: int, edges: np.ndarray):
    """Neighbouring tile indices and blend weight for every pixel along one axis."""
    centers = 0.5 * (edges[:-1] + edges[1:]) - 0.5
    pos = np.arange(n, dtype=np.float64)
    k0 = np.clip(np.searchsorted(centers, pos, side="right") - 1, 0, len(centers) - 1)
    k1 = np.minimum(k0 + 1, len(centers) - 1)
    span = centers[k1] - centers[k0]
    with np.errstate(invalid="ignore", divide="ignore"):
        wgt = np.where(span > 0, (pos - centers[k0]) / np.where(span > 0, span, 1.0), 0.0)
    return k0, k1, np.clip(wgt, 0.0, 1.0)


def clahe_plane(values: np.ndarray, tiles: tuple[int, int] = (8, 8), clip_limit: float = 2.0,
                bins: int = 256) -> np.ndarray:
    values = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    tx, ty = tiles
    if tx < 1 or ty < 1:
        raise ValueError(f"tile counts must be >= 1, got {tiles}")
    if not clip_limit >= 1:
        raise ValueError(f"clip_limit must be >= 1, got {clip_limit}")
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    h, w = values.shape
    if h < ty or w < tx:
        raise ValueError(f"{h}x{w} image is smaller than the {ty}x{tx} tile grid")

    luts, identity, ey, ex = tile_mappings(values, tiles, clip_limit, bins)
    bin_idx = np.minimum((values * bins).astype(np.int64), bins - 1)
    y0, y1, wy = _interp_axis(h, ey)
    x0, x1, wx = _interp_axis(w, ex)

    def mapped(ky, kx):
        ky, kx = ky[:, None], kx[None, :]
        return np.where(identity[ky, kx], values, luts[ky, kx, bin_idx])

    wy, wx = wy[:, None], wx[None, :]
    # nested lerps: equal tile maps blend to exactly their shared value
    top = mapped(y0, x0)
    top = top + wx * (mapped(y0, x1) - top)
    bottom = mapped(y1, x0)
    bottom = bottom + wx * (mapped(y1, x1) - bottom)
    out = top + wy * (bottom - top)
    return np.clip(out, 0.0, 1.0)


def clahe(img: RealImage, tiles: tuple[int, int] = (8, 8), clip_limit: float = 2.0,
          bins: int = 256) -> RealImage:
    """CLAHE applied channel by channel.

    ``tiles`` is ``(tiles_x, tiles_y)``; ``clip_limit`` is a multiple of the uniform bin height
    (``math.inf`` disables clipping). Clipped mass is spread evenly over all bins, tile maps are
    blended bilinearly between tile centres, and tiles with a single occupied bin map to identity.
    """
    planes = [clahe_plane(img.channel(c), tiles, clip_limit, bins) for c in range(img.channels)]
    return RealImage.stack(planes)
