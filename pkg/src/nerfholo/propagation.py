"""Band-limited angular spectrum propagation between parallel planes."""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .field import ComplexField, crop_center_array, frequency_grid, pad_center_array


@dataclass(frozen=True)
class PropagationParams:
    wavelength: float
    distance: float
    pitch: float
    band_limit: bool = True

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")
        if not self.pitch > 0:
            raise ValueError(f"pitch must be positive, got {self.pitch}")
        if not np.isfinite(self.distance):
            raise ValueError("distance must be finite")

    def with_distance(self, distance: float) -> PropagationParams:
        return PropagationParams(self.wavelength, distance, self.pitch, self.band_limit)


def band_limit_frequency(wavelength: float, distance: float, pitch: float, n: int) -> float:
    """Band limit ``1 / (lambda * sqrt((2 df z)^2 + 1))`` for one axis of ``n`` samples.

    ``df = 1 / (n * pitch)`` is the frequency spacing of the grid the transfer function lives on.
    """
    df = 1.0 / (n * pitch)
    return 1.0 / (wavelength * np.sqrt((2.0 * df * abs(distance)) ** 2 + 1.0))


@functools.lru_cache(maxsize=32)
def _transfer(wavelength: float, distance: float, pitch: float, width: int, height: int,
              band_limit: bool) -> np.ndarray:
    fx, fy = frequency_grid(height, width, pitch)
    arg = 1.0 / wavelength**2 - fx**2 - fy**2
    propagating = arg > 0
    kz = np.sqrt(np.where(propagating, arg, 0.0))
    h = np.where(propagating, np.exp(2j * np.pi * distance * kz), 0.0)
    if band_limit:
        fx_lim = band_limit_frequency(wavelength, distance, pitch, width)
        fy_lim = band_limit_frequency(wavelength, distance, pitch, height)
        h = h * ((np.abs(fx) <= fx_lim) & (np.abs(fy) <= fy_lim))
    h = h.astype(np.complex128)
    h.setflags(write=False)
    return h


def transfer_array(params: PropagationParams, grid_w: int, grid_h: int) -> np.ndarray:
    """Cached read-only transfer function, DC at index (0, 0)."""
    return _transfer(float(params.wavelength), float(params.distance), float(params.pitch),
                     int(grid_w), int(grid_h), bool(params.band_limit))


def asm_transfer(params: PropagationParams, grid_w: int, grid_h: int) -> ComplexField:
    """Frequency-domain transfer function ``exp(i 2 pi z sqrt(1/lambda^2 - fx^2 - fy^2))``.

    Evanescent frequencies are zeroed; with ``band_limit`` the per-axis aliasing-free band limit is
    applied too. Frequency origin sits at index (0, 0).
    """
    if grid_w < 2 or grid_h < 2:
        raise ValueError(f"transfer grid must be at least 2x2, got {grid_h}x{grid_w}")
    return ComplexField(transfer_array(params, grid_w, grid_h), params.pitch)


def propagate_array(u: np.ndarray, params: PropagationParams, pad: bool = True) -> np.ndarray:
    h, w = u.shape
    if pad:
        work = pad_center_array(u, 2 * h, 2 * w)
    else:
        work = u
    hh, ww = work.shape
    spectrum = np.fft.fft2(work)
    spectrum *= transfer_array(params, ww, hh)
    out = np.fft.ifft2(spectrum)
    return crop_center_array(out, h, w) if pad else out


def propagate(u: ComplexField, params: PropagationParams, pad: bool = True) -> ComplexField:
    """Propagate ``u`` by ``params.distance`` (negative distances back-propagate).

    With ``pad`` the field is zero-padded 2x before the FFT and centre-cropped afterwards,
    which keeps light from wrapping around the aperture.
    """
    if not np.isclose(u.pitch, params.pitch, rtol=1e-12, atol=0.0):
        raise ValueError(f"field pitch {u.pitch} does not match propagation pitch {params.pitch}")
    return ComplexField(propagate_array(u.data, params, pad), u.pitch)
