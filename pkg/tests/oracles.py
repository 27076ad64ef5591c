"""Independent reference computations used by the tests.

Each routine is written the slow, obvious way and shares no code with the package.
"""

import math

import numpy as np


def rayleigh_sommerfeld_impulse(n_out: int, pitch: float, wavelength: float, z: float,
                                supersample: int = 4, half_source: int = 32) -> np.ndarray:
    """Direct first-kind Rayleigh-Sommerfeld sum for the field of a unit sample at the origin.

    A unit sample on a grid of pitch ``p`` stands for the band-limited source
    ``sinc(x/p) sinc(y/p)``. That continuous source is integrated on a ``p/supersample``
    lattice over ``+-half_source`` pixels with the kernel
    ``z / (2 pi r^2) * (1/r - i k) * exp(i k r)``. Output samples sit at integer pixel offsets
    ``-n_out/2 .. n_out/2 - 1`` on both axes.

    Source and output offsets are commensurate, so the kernel is tabulated once on the lattice
    of differences and the sum for each output pixel is a plain weighted sum over the source.
    """
    k = 2 * math.pi / wavelength
    s = supersample
    j = np.arange(-half_source * s, half_source * s + 1)
    w1 = np.sinc(j / s)
    weights = np.outer(w1, w1) * (pitch / s) ** 2
    out_idx = np.arange(-(n_out // 2), n_out - n_out // 2)

    m_lo = s * out_idx[0] - j[-1]
    m_hi = s * out_idx[-1] - j[0]
    m = np.arange(m_lo, m_hi + 1) * pitch / s
    dx, dy = np.meshgrid(m, m)
    r = np.sqrt(dx * dx + dy * dy + z * z)
    kernel = z / (2 * math.pi * r * r) * (1 / r - 1j * k) * np.exp(1j * k * r)

    out = np.empty((n_out, n_out), complex)
    nj = len(j)
    for a, iy in enumerate(out_idx):
        # rows of the kernel for offsets s*iy - j, j ascending -> reversed slice
        r0 = s * iy - j[-1] - m_lo
        rows = kernel[r0:r0 + nj][::-1]
        for b, ix in enumerate(out_idx):
            c0 = s * ix - j[-1] - m_lo
            out[a, b] = np.sum(weights * rows[:, c0:c0 + nj][:, ::-1])
    return out


def global_histogram_equalization(values: np.ndarray, bins: int = 256) -> np.ndarray:
    """Textbook HE by sorting: each value maps to the fraction of pixels in bins at or below its own."""
    v = np.asarray(values, dtype=np.float64)
    idx = np.minimum((v * bins).astype(int), bins - 1).ravel()
    if np.all(idx == idx[0]):
        return v.copy()  # single occupied bin: defined as identity (HE would send it to 1)
    sorted_idx = np.sort(idx)
    # count of samples with bin <= idx, via binary search in the sorted bins
    rank = np.searchsorted(sorted_idx, idx, side="right")
    return (rank / idx.size).reshape(v.shape)


def psnr_loop(a, b) -> float:
    """PSNR with peak 1 using explicit loops."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    total = 0.0
    for x, y in zip(a, b):
        total += (x - y) * (x - y)
    mse = total / len(a)
    return math.inf if mse == 0 else 10 * math.log10(1 / mse)


def ray_sphere(origin, direction, center, radius):
    """Nearest positive hit distance of a single ray with a sphere, or None."""
    ox, oy, oz = (origin[i] - center[i] for i in range(3))
    dx, dy, dz = direction
    a = dx * dx + dy * dy + dz * dz
    b = 2 * (ox * dx + oy * dy + oz * dz)
    c = ox * ox + oy * oy + oz * oz - radius * radius
    disc = b * b - 4 * a * c
    if disc < 0:
        return None
    root = math.sqrt(disc)
    for t in sorted(((-b - root) / (2 * a), (-b + root) / (2 * a))):
        if t > 1e-9:
            return t
    return None


def ray_rect(origin, direction, axis, offset, lo, hi):
    if direction[axis] == 0:
        return None
    t = (offset - origin[axis]) / direction[axis]
    if t <= 1e-9:
        return None
    others = [i for i in range(3) if i != axis]
    for k, i in enumerate(others):
        p = origin[i] + t * direction[i]
        if p < lo[k] or p > hi[k]:
            return None
    return t


def ray_box(origin, direction, lo, hi):
    """Slab test written per axis with explicit branches."""
    t_enter, t_exit = -math.inf, math.inf
    for i in range(3):
        if direction[i] == 0:
            if origin[i] < lo[i] or origin[i] > hi[i]:
                return None
            continue
        t1 = (lo[i] - origin[i]) / direction[i]
        t2 = (hi[i] - origin[i]) / direction[i]
        t_enter = max(t_enter, min(t1, t2))
        t_exit = min(t_exit, max(t1, t2))
    if t_exit < t_enter or t_exit <= 1e-9:
        return None
    return t_enter if t_enter > 1e-9 else t_exit
