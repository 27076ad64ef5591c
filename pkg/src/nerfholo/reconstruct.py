"""Simulated optical reconstruction of hologram sets and image-quality metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cgh import HologramSet, carrier_phasor
from .field import ComplexField, RealImage
from .propagation import PropagationParams, band_limit_frequency, propagate_array


def psnr(a: RealImage | np.ndarray, b: RealImage | np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for peak value 1; ``math.inf`` when the images match."""
    x = a.data if isinstance(a, RealImage) else np.asarray(a, dtype=np.float64)
    y = b.data if isinstance(b, RealImage) else np.asarray(b, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"image shapes differ: {x.shape} vs {y.shape}")
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def lowpass_mask(shape: tuple[int, int], aperture: float, center: tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
    """Circular pass band of radius ``aperture * 0.5`` cycles/pixel around ``center`` (cx, cy)."""
    h, w = shape
    fx = np.fft.fftfreq(w)[None, :] - center[0]
    fy = np.fft.fftfreq(h)[:, None] - center[1]
    # wrap so the disc stays circular when centred off DC
    fx = (fx + 0.5) % 1.0 - 0.5
    fy = (fy + 0.5) % 1.0 - 0.5
    return fx**2 + fy**2 <= (0.5 * aperture) ** 2


def decode_double_phase(phase: np.ndarray, pitch: float, aperture: float = 0.5,
                        center: tuple[float, float] = (0.0, 0.0)) -> ComplexField:
    """Numerical 4f filter: FFT of ``exp(i phase)``, circular low-pass, inverse FFT.

    ``phase`` is in radians. ``aperture`` is the pass-band radius as a fraction of Nyquist and
    ``center`` places the pass band on an off-axis carrier (cycles/pixel).
    """
    if not 0 < aperture <= 1:
        raise ValueError(f"aperture must be in (0, 1], got {aperture}")
    slm = np.exp(1j * np.asarray(phase, dtype=np.float64))
    spectrum = np.fft.fft2(slm) * lowpass_mask(slm.shape, aperture, center)
    return ComplexField(np.fft.ifft2(spectrum), pitch)


def hologram_plane_field(hset: HologramSet, index: int, aperture: float = 0.5) -> np.ndarray:
    """Complex field just after the hologram with the carrier removed."""
    ch = hset.channels[index]
    if hset.encoding == "double_phase":
        u = decode_double_phase(ch.data, hset.pitch, aperture, hset.carrier).data * ch.scale
    else:
        u = ch.data * ch.scale
    if tuple(hset.carrier) != (0.0, 0.0):
        u = u * np.conj(carrier_phasor(u.shape, hset.carrier))
    return u


@dataclass
class ChannelReconstruction:
    wavelength: float
    focus: float
    intensity: np.ndarray
    psnr: float | None = None


@dataclass
class ReconstructionReport:
    focus: float
    channels: list[ChannelReconstruction]
    composite: RealImage
    std: float
    histogram: np.ndarray
    psnr: float | None = None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def db(v):
            if v is None:
                return None
            return "inf" if math.isinf(v) else round(v, 6)

        return {
            "focus": self.focus,
            "psnr_db": db(self.psnr),
            "identical": self.psnr is not None and math.isinf(self.psnr),
            "std": self.std,
            "mean": float(self.composite.data.mean()),
            "histogram": [int(x) for x in self.histogram],
            "channels": [
                {"wavelength": c.wavelength, "focus": c.focus, "psnr_db": db(c.psnr),
                 "mean_intensity": float(c.intensity.mean()), "max_intensity": float(c.intensity.max())}
                for c in self.channels
            ],
            **self.extras,
        }


def check_band_limit(wavelength: float, focus: float, pitch: float, n: int) -> None:
    df = 1.0 / (n * pitch)
    if band_limit_frequency(wavelength, focus, pitch, n) < 2 * df:
        raise ValueError(f"focus {focus} m collapses the band limit below two frequency bins "
                         f"(wavelength {wavelength} m, {n} samples)")


def reconstruct_intensity(hset: HologramSet, focus: float, reference: RealImage | None = None,
                          aperture: float = 0.5, pad: bool = True, band_limit: bool = True,
                          hist_bins: int = 64) -> ReconstructionReport:
    """Back-propagate every channel by ``focus`` meters and report ``|u|^2``.

    Encoded channels go through :func:`decode_double_phase` first; the carrier is removed
    before propagation. With a ``reference`` (linear RGB in [0, 1]) the clamped composite is
    scored by :func:`psnr`.
    """
    h, w = hset.shape
    grid = 2 * max(h, w) if pad else max(h, w)
    channels = []
    for i, ch in enumerate(hset.channels):
        if band_limit:
            check_band_limit(ch.wavelength, focus, hset.pitch, grid)
        u = hologram_plane_field(hset, i, aperture)
        params = PropagationParams(ch.wavelength, -focus, hset.pitch, band_limit)
        intensity = np.abs(propagate_array(u, params, pad)) ** 2
        channels.append(ChannelReconstruction(ch.wavelength, focus, intensity))

    composite = RealImage(np.stack([c.intensity for c in channels], axis=-1)).clamp()
    score = None
    if reference is not None:
        score = psnr(composite, reference)
        for c, ref_plane in zip(channels, np.moveaxis(reference.data, -1, 0)):
            c.psnr = psnr(np.clip(c.intensity, 0, 1), ref_plane)
    hist, _ = np.histogram(composite.data, bins=hist_bins, range=(0.0, 1.0))
    return ReconstructionReport(focus, channels, composite, float(composite.data.std()), hist, score)


def focal_stack(hset: HologramSet, focuses, reference: RealImage | None = None,
                **kwargs) -> list[ReconstructionReport]:
    return [reconstruct_intensity(hset, z, reference, **kwargs) for z in focuses]
