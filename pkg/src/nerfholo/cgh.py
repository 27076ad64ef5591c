"""RGB-D to hologram synthesis and conditioning.

A classical layered synthesizer: the depth range is cut into equal slabs, every slab becomes
a complex layer field, and each layer is propagated to the hologram plane with the angular
spectrum method and summed. The complex result can then be tilted by a linear-phase carrier,
double-phase encoded for a phase-only SLM, and contrast-enhanced with CLAHE.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from .clahe import clahe_plane
from .field import ComplexField, RealImage
from .propagation import PropagationParams, propagate_array

TWO_PI = 2.0 * np.pi
DEFAULT_WAVELENGTHS = (650e-9, 532e-9, 450e-9)
DEFAULT_PITCH = 8.0e-6
DEFAULT_DISTANCE = 0.6e-3


class EmptyForegroundWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class RgbdFrame:
    """Registered linear RGB image and depth map (meters). Depth ``>= far`` marks background."""

    rgb: RealImage
    depth: RealImage
    near: float
    far: float

    def __post_init__(self):
        if self.rgb.channels != 3 or self.depth.channels != 1:
            raise ValueError("RgbdFrame needs a 3-channel rgb image and a 1-channel depth map")
        if (self.rgb.height, self.rgb.width) != (self.depth.height, self.depth.width):
            raise ValueError("rgb and depth dimensions differ")
        if not self.near < self.far:
            raise ValueError(f"near ({self.near}) must be < far ({self.far})")

    @property
    def shape(self) -> tuple[int, int]:
        return self.rgb.height, self.rgb.width

    def foreground(self) -> np.ndarray:
        return self.depth.channel(0) < self.far


@dataclass(frozen=True, eq=False)
class LayerStack:
    depths: np.ndarray        # slab centres in scene meters, ascending
    fields: np.ndarray        # (n_layers, H, W, 3) complex, one plane per colour channel
    masks: np.ndarray         # (n_layers, H, W) bool
    index: np.ndarray         # (H, W) slab index, -1 for background
    empty: bool = False

    @property
    def n_layers(self) -> int:
        return len(self.depths)

    def nonempty(self) -> list[int]:
        return [k for k in range(self.n_layers) if self.masks[k].any()]


def slab_index(depth: np.ndarray, near: float, far: float, n_layers: int) -> np.ndarray:
    k = np.floor((depth - near) / (far - near) * n_layers).astype(np.int64)
    return np.clip(k, 0, n_layers - 1)


def slice_layers(frame: RgbdFrame, n_layers: int, near: float | None = None, far: float | None = None,
                 phase: Literal["random", "constant"] = "random", seed: int = 0) -> LayerStack:
    """Split ``frame`` into ``n_layers`` equal depth slabs between ``near`` and ``far``.

    Each foreground pixel carries amplitude ``sqrt(rgb)`` in its slab, with a per-pixel phase
    drawn uniformly from ``[0, 2 pi)`` (``phase="random"``, seeded) or zero (``"constant"``).
    The same phase is shared by the three colour channels.
    """
    near = frame.near if near is None else near
    far = frame.far if far is None else far
    if n_layers < 1:
        raise ValueError(f"n_layers must be >= 1, got {n_layers}")
    if not near < far:
        raise ValueError(f"near ({near}) must be < far ({far})")
    h, w = frame.shape
    fg = frame.foreground()
    if not fg.any():
        warnings.warn("RGB-D frame has no foreground pixels; producing one empty layer",
                      EmptyForegroundWarning, stacklevel=2)
        return LayerStack(depths=np.array([0.5 * (near + far)]),
                          fields=np.zeros((1, h, w, 3), np.complex128),
                          masks=np.zeros((1, h, w), bool),
                          index=np.full((h, w), -1, np.int64), empty=True)

    index = np.where(fg, slab_index(frame.depth.channel(0), near, far, n_layers), -1)
    if phase == "random":
        phasor = np.exp(1j * np.random.default_rng(seed).uniform(0.0, TWO_PI, size=(h, w)))
    elif phase == "constant":
        phasor = np.ones((h, w), np.complex128)
    else:
        raise ValueError(f"phase must be 'random' or 'constant', got {phase!r}")
    amp = np.sqrt(np.clip(frame.rgb.data, 0.0, None)) * phasor[:, :, None]

    masks = np.stack([index == k for k in range(n_layers)])
    fields = np.where(masks[:, :, :, None], amp[None], 0.0).astype(np.complex128)
    slab = (far - near) / n_layers
    depths = near + slab * (np.arange(n_layers) + 0.5)
    return LayerStack(depths=depths, fields=fields, masks=masks, index=index)


@dataclass(frozen=True, eq=False)
class HologramChannel:
    """One colour plane. ``data`` is complex for ``encoding == "complex"`` and phase in
    radians, ``[0, 2 pi)``, for ``"double_phase"``. Multiplying the decoded field by ``scale``
    undoes the amplitude normalization applied before encoding."""

    wavelength: float
    data: np.ndarray
    scale: float = 1.0


@dataclass(frozen=True, eq=False)
class HologramSet:
    channels: tuple[HologramChannel, ...]
    pitch: float
    encoding: Literal["complex", "double_phase"] = "complex"
    carrier: tuple[float, float] = (0.0, 0.0)
    distance: float = DEFAULT_DISTANCE
    enhanced: bool = False

    def __post_init__(self):
        if self.encoding not in ("complex", "double_phase"):
            raise ValueError(f"unknown encoding {self.encoding!r}")
        shapes = {c.data.shape for c in self.channels}
        if len(shapes) != 1:
            raise ValueError(f"hologram channels differ in shape: {shapes}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.channels[0].data.shape

    @property
    def wavelengths(self) -> tuple[float, ...]:
        return tuple(c.wavelength for c in self.channels)

    def field(self, index: int) -> ComplexField:
        if self.encoding != "complex":
            raise ValueError("only complex hologram sets expose complex fields")
        ch = self.channels[index]
        return ComplexField(ch.data * ch.scale, self.pitch)


@dataclass(frozen=True)
class SynthesisParams:
    pitch: float = DEFAULT_PITCH
    wavelengths: tuple[float, ...] = DEFAULT_WAVELENGTHS
    base_distance: float = DEFAULT_DISTANCE
    layer_spacing: float = 50e-6
    phase: Literal["random", "constant"] = "random"
    fit_depth_range: bool = False
    seed: int = 0
    band_limit: bool = True
    pad: bool = True

    def __post_init__(self):
        if len(self.wavelengths) != 3:
            raise ValueError(f"need one wavelength per colour channel, got {self.wavelengths}")

    def layer_distance(self, k: int) -> float:
        return self.base_distance + k * self.layer_spacing


def synthesize_layers(stack: LayerStack, params: SynthesisParams) -> HologramSet:
    h, w = stack.index.shape
    channels = []
    for c, wavelength in enumerate(params.wavelengths):
        holo = np.zeros((h, w), np.complex128)
        for k in stack.nonempty():
            prop = PropagationParams(wavelength, params.layer_distance(k), params.pitch, params.band_limit)
            try:
                holo += propagate_array(stack.fields[k, :, :, c], prop, params.pad)
            except Exception as exc:
                raise RuntimeError(f"propagation failed for layer {k}, channel {c}: {exc}") from exc
        channels.append(HologramChannel(wavelength, holo))
    return HologramSet(tuple(channels), params.pitch, "complex", distance=params.base_distance)


def synthesize(frame: RgbdFrame, n_layers: int = 8, params: SynthesisParams = SynthesisParams()) -> HologramSet:
    """Complex RGB hologram of ``frame``: layer ``k`` sits ``base_distance + k * layer_spacing``
    in front of the hologram plane and is propagated onto it.

    Slabs cover ``[frame.near, frame.far]`` unless ``params.fit_depth_range`` narrows them to
    the foreground's own depth range, which puts the nearest content on layer 0.
    """
    near = far = None
    if params.fit_depth_range:
        fg = frame.foreground()
        if fg.any():
            d = frame.depth.channel(0)[fg]
            near, far = float(d.min()), float(d.max())
            if not far > near:
                far = near + 1.0  # single depth: everything lands in slab 0
    stack = slice_layers(frame, n_layers, near, far, phase=params.phase, seed=params.seed)
    return synthesize_layers(stack, params)


def add_linear_phase(h: ComplexField, carrier: tuple[float, float]) -> ComplexField:
    """Multiply by ``exp(i 2 pi (cx * col + cy * row))``; carrier in cycles per pixel."""
    return ComplexField(h.data * carrier_phasor(h.shape, carrier), h.pitch)


def carrier_phasor(shape: tuple[int, int], carrier: tuple[float, float]) -> np.ndarray:
    cx, cy = carrier
    if abs(cx) >= 0.5 or abs(cy) >= 0.5:
        raise ValueError(f"carrier {carrier} is at or beyond Nyquist (0.5 cycles/pixel)")
    rows, cols = np.indices(shape)
    return np.exp(2j * np.pi * (cx * cols + cy * rows))


def double_phase_encode(h: ComplexField, phase_floor: float = 0.0) -> tuple[np.ndarray, float]:
    """Phase-only checkerboard encoding of ``h``.

    The field is divided by ``scale = max|h|`` so its amplitude ``a`` lies in [0, 1]; with
    ``theta = arccos(a)`` pixels where ``row + col`` is even get ``phi + theta`` and odd pixels
    get ``phi - theta``. Returns ``(phase in [0, 2 pi), scale)``.

    ``phase_floor > 0`` takes ``phi`` from ``h / scale + phase_floor`` instead. Where the
    amplitude is far below the floor the phase is pulled towards zero, which removes the
    speckle-like phase of dark regions that would otherwise leak broadband energy past
    the decoding filter. Amplitude is left untouched.
    """
    if phase_floor < 0:
        raise ValueError(f"phase_floor must be >= 0, got {phase_floor}")
    peak = float(np.max(np.abs(h.data)))
    # an all-zero field keeps scale 0 so decoding it gives exactly zero
    normalized = h.data / peak if peak > 0 else np.zeros_like(h.data)
    a = np.clip(np.abs(normalized), 0.0, 1.0)
    theta = np.arccos(a)
    phi = np.angle(normalized + phase_floor)
    rows, cols = np.indices(h.shape)
    even = (rows + cols) % 2 == 0
    phase = np.where(even, phi + theta, phi - theta)
    return np.mod(phase, TWO_PI), peak


def quantize_phase(phase: np.ndarray, levels: int = 65536) -> np.ndarray:
    """Round phase to the ``levels`` steps a 16-bit hologram file can hold, wrapped to [0, 2 pi)."""
    q = np.round(np.mod(phase, TWO_PI) / TWO_PI * (levels - 1)) / (levels - 1)
    return np.mod(q * TWO_PI, TWO_PI)


def encode_hologram_set(hset: HologramSet, carrier: tuple[float, float] = (0.0, 0.0),
                        quantize: bool = False, phase_floor: float = 0.0) -> HologramSet:
    """Carrier then double-phase encoding for every channel of a complex set."""
    if hset.encoding != "complex":
        raise ValueError("hologram set is already encoded")
    channels = []
    for i, ch in enumerate(hset.channels):
        f = hset.field(i)
        if carrier != (0.0, 0.0):
            f = add_linear_phase(f, carrier)
        phase, scale = double_phase_encode(f, phase_floor)
        if quantize:
            phase = quantize_phase(phase)
        channels.append(HologramChannel(ch.wavelength, phase, scale))
    return replace(hset, channels=tuple(channels), encoding="double_phase", carrier=tuple(carrier))


@dataclass(frozen=True)
class ClaheParams:
    tiles: tuple[int, int] = (8, 8)
    clip_limit: float = 2.0
    bins: int = 256


def enhance_hologram(hset: HologramSet, params: ClaheParams = ClaheParams()) -> HologramSet:
    """CLAHE on each encoded phase image, treated as ``phase / 2 pi`` in [0, 1]."""
    if hset.encoding != "double_phase":
        raise ValueError("enhancement is defined on double-phase encoded holograms only")
    channels = []
    for ch in hset.channels:
        eq = clahe_plane(ch.data / TWO_PI, params.tiles, params.clip_limit, params.bins)
        channels.append(HologramChannel(ch.wavelength, np.mod(eq * TWO_PI, TWO_PI), ch.scale))
    return replace(hset, channels=tuple(channels), enhanced=True)
