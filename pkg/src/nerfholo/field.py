"""Complex fields, real images and the Fourier plumbing shared by the wave-optics code.

Conventions used everywhere in the package:

* arrays are row-major ``(height, width)``; pixel ``(0, 0)`` is the top-left corner
* the DFT is unitary (``1/sqrt(N)`` in both directions), frequency origin at index ``(0, 0)``;
  use :func:`fftshift` / :func:`ifftshift` to move it to the centre for display
* pixels are square, a single ``pitch`` in meters
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

MAX_PIXELS = 1 << 28


def _check_dims(height: int, width: int) -> None:
    if width < 1 or height < 1:
        raise ValueError(f"field dimensions must be positive, got {height}x{width}")
    if width * height > MAX_PIXELS:
        raise OverflowError(f"{height}x{width} exceeds the {MAX_PIXELS}-pixel limit")


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Immutable 2D grid of complex amplitudes sampled at ``pitch`` meters."""

    data: np.ndarray
    pitch: float

    def __post_init__(self):
        shape = np.shape(self.data)
        if len(shape) != 2:
            raise ValueError(f"ComplexField needs a 2D array, got shape {shape}")
        _check_dims(*shape)
        arr = np.array(self.data, dtype=np.complex128, copy=True)
        if not self.pitch > 0:
            raise ValueError(f"pitch must be positive, got {self.pitch}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("ComplexField contains NaN or Inf")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "pitch", float(self.pitch))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def energy(self) -> float:
        return float(np.sum(np.abs(self.data) ** 2))

    def amplitude(self) -> np.ndarray:
        return np.abs(self.data)

    def intensity(self) -> np.ndarray:
        return np.abs(self.data) ** 2

    def replace(self, data: np.ndarray) -> ComplexField:
        return ComplexField(data, self.pitch)

    @classmethod
    def zeros(cls, height: int, width: int, pitch: float) -> ComplexField:
        return cls(np.zeros((height, width), np.complex128), pitch)

    @classmethod
    def impulse(cls, height: int, width: int, pitch: float, at: tuple[int, int] | None = None) -> ComplexField:
        """Unit impulse, at the centre pixel ``(height // 2, width // 2)`` unless ``at`` is given."""
        arr = np.zeros((height, width), np.complex128)
        arr[at if at is not None else (height // 2, width // 2)] = 1.0
        return cls(arr, pitch)


@dataclass(frozen=True, eq=False)
class RealImage:
    """Float image with 1 or 3 channels, stored as ``(height, width, channels)``.

    Colour images hold linear radiance in [0, 1]; depth maps hold meters. Only
    :meth:`clamp` enforces the [0, 1] range.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, copy=True)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ValueError(f"RealImage needs (H, W), (H, W, 1) or (H, W, 3), got {np.shape(self.data)}")
        _check_dims(arr.shape[0], arr.shape[1])
        if not np.all(np.isfinite(arr)):
            raise ValueError("RealImage contains NaN or Inf")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def channel(self, index: int) -> np.ndarray:
        return self.data[:, :, index]

    def clamp(self) -> RealImage:
        return RealImage(np.clip(self.data, 0.0, 1.0))

    @classmethod
    def stack(cls, planes) -> RealImage:
        return cls(np.stack([np.asarray(p, np.float64) for p in planes], axis=-1))


def fft2(f: ComplexField, direction: Literal["forward", "inverse"] = "forward") -> ComplexField:
    """Unitary 2D DFT. The returned field keeps the input pitch as bookkeeping only."""
    if direction == "forward":
        out = np.fft.fft2(f.data, norm="ortho")
    elif direction == "inverse":
        out = np.fft.ifft2(f.data, norm="ortho")
    else:
        raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    return ComplexField(out, f.pitch)


def fftshift(f: ComplexField) -> ComplexField:
    return ComplexField(np.fft.fftshift(f.data), f.pitch)


def ifftshift(f: ComplexField) -> ComplexField:
    return ComplexField(np.fft.ifftshift(f.data), f.pitch)


def frequency_grid(height: int, width: int, pitch: float) -> tuple[np.ndarray, np.ndarray]:
    """Spatial frequencies (cycles/m) ``(fx, fy)`` broadcastable to ``(height, width)``, DC at index 0."""
    fx = np.fft.fftfreq(width, d=pitch)[None, :]
    fy = np.fft.fftfreq(height, d=pitch)[:, None]
    return fx, fy


def _center_offsets(big: int, small: int) -> int:
    return (big - small) // 2


def pad_center_array(arr: np.ndarray, new_h: int, new_w: int) -> np.ndarray:
    h, w = arr.shape[:2]
    if new_h < h or new_w < w:
        raise ValueError(f"cannot pad {h}x{w} to smaller {new_h}x{new_w}")
    _check_dims(new_h, new_w)
    oy, ox = _center_offsets(new_h, h), _center_offsets(new_w, w)
    out = np.zeros((new_h, new_w) + arr.shape[2:], dtype=arr.dtype)
    out[oy:oy + h, ox:ox + w] = arr
    return out


def crop_center_array(arr: np.ndarray, new_h: int, new_w: int) -> np.ndarray:
    h, w = arr.shape[:2]
    if new_h > h or new_w > w or new_h < 1 or new_w < 1:
        raise ValueError(f"cannot crop {h}x{w} to {new_h}x{new_w}")
    oy, ox = _center_offsets(h, new_h), _center_offsets(w, new_w)
    return arr[oy:oy + new_h, ox:ox + new_w]


def pad_center(f: ComplexField, new_w: int, new_h: int) -> ComplexField:
    """Zero-pad so the original occupies rows/cols starting at ``(new - old) // 2``."""
    return ComplexField(pad_center_array(f.data, new_h, new_w), f.pitch)


def crop_center(f: ComplexField, new_w: int, new_h: int) -> ComplexField:
    """Inverse of :func:`pad_center` for the same target size."""
    return ComplexField(crop_center_array(f.data, new_h, new_w), f.pitch)
