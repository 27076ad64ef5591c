"""Binary voxel-grid checkpoints.

Layout (little-endian)::

    magic       4 bytes   b"HFRG"
    version     u32       1
    resolution  3 x u32   Nx, Ny, Nz
    bounds      6 x f32   lo_x, lo_y, lo_z, hi_x, hi_y, hi_z
    planes      4 x (Nx*Ny*Nz) f32, C order over (x, y, z):
                density, red, green, blue (all pre-activation)
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .fields import RadianceGrid

MAGIC = b"HFRG"
VERSION = 1
_HEAD = struct.Struct("<4sI3I6f")


def save_checkpoint(path, grid: RadianceGrid) -> None:
    head = _HEAD.pack(MAGIC, VERSION, *grid.resolution, *grid.bounds.ravel().tolist())
    planes = np.moveaxis(grid.params, -1, 0).astype("<f4")
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(planes.tobytes(order="C"))


def load_checkpoint(path) -> RadianceGrid:
    raw = Path(path).read_bytes()
    if len(raw) < _HEAD.size:
        raise ValueError(f"{path}: truncated checkpoint")
    magic, version, nx, ny, nz, *bounds = _HEAD.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    count = 4 * nx * ny * nz
    body = np.frombuffer(raw, dtype="<f4", count=count, offset=_HEAD.size)
    if body.size != count:
        raise ValueError(f"{path}: truncated parameter planes")
    params = np.moveaxis(body.reshape(4, nx, ny, nz), 0, -1).astype(np.float64)
    return RadianceGrid((nx, ny, nz), np.array(bounds, dtype=np.float64).reshape(2, 3), params)
