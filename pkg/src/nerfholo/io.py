"""Image interchange: PFM for floats, PNG for 8/16-bit.

PFM files are written little-endian (scale ``-1.0``) with rows stored bottom-to-top as the
format requires. Complex fields are stored as a ``<stem>.re.pfm`` / ``<stem>.im.pfm`` pair.
8-bit PNGs are sRGB encoded on save and linearized on load.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np
from PIL import Image

from .field import ComplexField, RealImage


def write_pfm(path, data: np.ndarray) -> None:
    arr = np.asarray(data, dtype=np.float32)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim == 2:
        tag = b"Pf"
    elif arr.ndim == 3 and arr.shape[2] == 3:
        tag = b"PF"
    else:
        raise ValueError(f"PFM holds 1 or 3 channels, got shape {arr.shape}")
    h, w = arr.shape[:2]
    with open(path, "wb") as fh:
        fh.write(tag + b"\n")
        fh.write(f"{w} {h}\n".encode())
        fh.write(b"-1.0\n")
        fh.write(np.flipud(arr).astype("<f4").tobytes())


_HEADER = re.compile(rb"^(PF|Pf)\s+(\d+)\s+(\d+)\s+(\S+)\s", re.S)


def read_pfm(path) -> np.ndarray:
    """Return ``(H, W)`` or ``(H, W, 3)`` float32 array."""
    raw = Path(path).read_bytes()
    m = _HEADER.match(raw)
    if m is None:
        raise ValueError(f"{path}: not a PFM file")
    tag, w, h, scale = m.group(1), int(m.group(2)), int(m.group(3)), float(m.group(4))
    channels = 3 if tag == b"PF" else 1
    dtype = "<f4" if scale < 0 else ">f4"
    count = w * h * channels
    body = np.frombuffer(raw, dtype=dtype, count=count, offset=m.end())
    shape = (h, w, 3) if channels == 3 else (h, w)
    return np.flipud(body.reshape(shape)).astype(np.float32)


def save_image_pfm(path, img: RealImage) -> None:
    write_pfm(path, img.data)


def load_image_pfm(path) -> RealImage:
    return RealImage(read_pfm(path).astype(np.float64))


def save_field_pfm(stem, f: ComplexField) -> tuple[Path, Path]:
    stem = Path(stem)
    re_path = stem.with_name(stem.name + ".re.pfm")
    im_path = stem.with_name(stem.name + ".im.pfm")
    write_pfm(re_path, f.data.real)
    write_pfm(im_path, f.data.imag)
    return re_path, im_path


def load_field_pfm(stem, pitch: float) -> ComplexField:
    stem = Path(stem)
    re_part = read_pfm(stem.with_name(stem.name + ".re.pfm")).astype(np.float64)
    im_part = read_pfm(stem.with_name(stem.name + ".im.pfm")).astype(np.float64)
    return ComplexField(re_part + 1j * im_part, pitch)


def srgb_encode(linear: np.ndarray) -> np.ndarray:
    x = np.clip(linear, 0.0, 1.0)
    return np.where(x <= 0.0031308, 12.92 * x, 1.055 * np.power(x, 1 / 2.4) - 0.055)


def srgb_decode(encoded: np.ndarray) -> np.ndarray:
    x = np.clip(encoded, 0.0, 1.0)
    return np.where(x <= 0.04045, x / 12.92, np.power((x + 0.055) / 1.055, 2.4))


def save_png8(path, img: RealImage) -> None:
    """Linear [0, 1] image to an sRGB 8-bit PNG."""
    q = np.round(srgb_encode(img.data) * 255.0).astype(np.uint8)
    mode = "RGB" if img.channels == 3 else "L"
    Image.fromarray(q if img.channels == 3 else q[:, :, 0], mode=mode).save(path, optimize=False)


def load_png8(path) -> RealImage:
    """sRGB 8-bit PNG (grey, RGB or RGBA) to a linear RealImage; alpha composites onto black."""
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB", "RGBA"):
            im = im.convert("RGBA")
        arr = np.asarray(im, dtype=np.float64) / 255.0
    if arr.ndim == 3 and arr.shape[2] == 4:
        return RealImage(srgb_decode(arr[:, :, :3]) * arr[:, :, 3:])
    return RealImage(srgb_decode(arr))


def save_png16(path, values: np.ndarray) -> None:
    """Single-channel values in [0, 1] to a 16-bit greyscale PNG (no gamma)."""
    q = quantize16(values)
    Image.fromarray(q.astype(np.uint16)).save(path, optimize=False)


def quantize16(values: np.ndarray) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    return np.round(np.clip(v, 0.0, 1.0) * 65535.0).astype(np.uint16)


def load_png16(path) -> np.ndarray:
    """16-bit greyscale PNG to float64 values in [0, 1]."""
    with Image.open(path) as im:
        arr = np.asarray(im).astype(np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{path}: expected a single-channel PNG")
    return arr / 65535.0


CHANNEL_NAMES = ("r", "g", "b")


def save_hologram_set(directory, hset, stem: str = "hologram") -> Path:
    """Write ``hset`` next to a ``<stem>.json`` sidecar and return the sidecar path.

    Encoded sets become one 16-bit PNG per channel holding ``phase / 2 pi``; complex sets
    become PFM pairs. The sidecar records wavelength, pitch, normalization factor, encoding
    and carrier, everything needed to reload and reconstruct.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for name, ch in zip(CHANNEL_NAMES, hset.channels):
        if hset.encoding == "double_phase":
            fname = f"{stem}_{name}.png"
            save_png16(directory / fname, ch.data / (2 * np.pi))
        else:
            fname = f"{stem}_{name}"
            save_field_pfm(directory / fname, ComplexField(ch.data, hset.pitch))
        entries.append({"file": fname, "wavelength": ch.wavelength, "scale": ch.scale})
    meta = {"encoding": hset.encoding, "pitch": hset.pitch, "carrier": list(hset.carrier),
            "distance": hset.distance, "enhanced": hset.enhanced, "phase_levels": 65536,
            "channels": entries}
    path = directory / f"{stem}.json"
    path.write_text(json.dumps(meta, indent=2) + "\n")
    return path


def load_hologram_set(sidecar):
    """Inverse of :func:`save_hologram_set`."""
    from .cgh import HologramChannel, HologramSet

    sidecar = Path(sidecar)
    meta = json.loads(sidecar.read_text())
    channels = []
    for entry in meta["channels"]:
        target = sidecar.parent / entry["file"]
        if meta["encoding"] == "double_phase":
            data = np.mod(load_png16(target) * (2 * np.pi), 2 * np.pi)
        else:
            data = load_field_pfm(target, meta["pitch"]).data
        channels.append(HologramChannel(entry["wavelength"], data, entry["scale"]))
    return HologramSet(tuple(channels), meta["pitch"], meta["encoding"], tuple(meta["carrier"]),
                       meta["distance"], meta["enhanced"])
