"""Pinhole cameras, posed datasets and the pose-file formats.

Camera frames follow the OpenGL/NeRF convention: the camera looks down its local ``-z`` axis
with ``+y`` up and ``+x`` right. ``rotation`` maps camera to world coordinates. World ``+z``
is up for the view-vector helpers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from ..field import RealImage
from .. import io as imgio

WORLD_UP = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True, eq=False)
class CameraPose:
    position: np.ndarray
    rotation: np.ndarray
    focal: float
    width: int
    height: int
    cx: float | None = None
    cy: float | None = None

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=np.float64).reshape(3)
        rot = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        if np.max(np.abs(rot.T @ rot - np.eye(3))) > 1e-8:
            raise ValueError("camera rotation is not orthonormal")
        if not self.focal > 0:
            raise ValueError(f"focal length must be positive, got {self.focal}")
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image size must be positive, got {self.width}x{self.height}")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "cx", self.width / 2 if self.cx is None else float(self.cx))
        object.__setattr__(self, "cy", self.height / 2 if self.cy is None else float(self.cy))

    @property
    def forward(self) -> np.ndarray:
        return -self.rotation[:, 2]

    @property
    def c2w(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.position
        return m

    @classmethod
    def from_c2w(cls, c2w, focal: float, width: int, height: int, cx=None, cy=None) -> CameraPose:
        m = np.asarray(c2w, dtype=np.float64)
        return cls(m[:3, 3], orthonormalize(m[:3, :3]), focal, width, height, cx, cy)

    @classmethod
    def look_at(cls, position, target=(0.0, 0.0, 0.0), focal: float = 100.0, width: int = 128,
                height: int = 128, up=WORLD_UP) -> CameraPose:
        position = np.asarray(position, dtype=np.float64)
        fwd = np.asarray(target, dtype=np.float64) - position
        return cls(position, _rotation_from_forward(fwd, np.asarray(up, float)), focal, width, height)

    @classmethod
    def from_view_vector(cls, x: float, y: float, z: float, theta: float, phi: float,
                         focal: float = 100.0, width: int = 128, height: int = 128) -> CameraPose:
        """Camera at ``(x, y, z)`` looking along azimuth ``theta`` and elevation ``phi`` (radians)."""
        fwd = np.array([math.cos(phi) * math.cos(theta), math.cos(phi) * math.sin(theta), math.sin(phi)])
        return cls(np.array([x, y, z], float), _rotation_from_forward(fwd, WORLD_UP), focal, width, height)

    def view_vector(self) -> tuple[float, float, float, float, float]:
        f = self.forward
        theta = math.atan2(f[1], f[0])
        phi = math.asin(float(np.clip(f[2], -1.0, 1.0)))
        return (*map(float, self.position), theta, phi)

    def with_size(self, width: int, height: int) -> CameraPose:
        """Same field of view at a different image size."""
        s = width / self.width
        return CameraPose(self.position, self.rotation, self.focal * s, width, height,
                          self.cx * s, self.cy * height / self.height)

    def rays(self) -> tuple[np.ndarray, np.ndarray]:
        """Unit-direction rays through pixel centres, row-major, each ``(height * width, 3)``."""
        v, u = np.mgrid[0:self.height, 0:self.width].astype(np.float64)
        cam = np.stack([(u + 0.5 - self.cx) / self.focal,
                        -(v + 0.5 - self.cy) / self.focal,
                        -np.ones_like(u)], axis=-1).reshape(-1, 3)
        dirs = cam @ self.rotation.T
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        origins = np.broadcast_to(self.position, dirs.shape).copy()
        return origins, dirs

    def to_record(self) -> dict:
        return {"c2w": self.c2w.tolist(), "focal_px": self.focal, "width": self.width,
                "height": self.height, "cx": self.cx, "cy": self.cy}


def orthonormalize(r: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(r)
    out = u @ vt
    if np.linalg.det(out) < 0:
        u[:, -1] *= -1
        out = u @ vt
    return out


def _rotation_from_forward(fwd: np.ndarray, up: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(fwd)
    if norm == 0:
        raise ValueError("camera forward direction is zero")
    fwd = fwd / norm
    right = np.cross(fwd, up)
    if np.linalg.norm(right) < 1e-9:
        right = np.cross(fwd, np.array([0.0, 1.0, 0.0]))
    right /= np.linalg.norm(right)
    cam_up = np.cross(right, fwd)
    return np.stack([right, cam_up, -fwd], axis=1)


@dataclass(eq=False)
class PosedDataset:
    images: list[RealImage]
    poses: list[CameraPose]
    depths: list[RealImage] | None = None
    shared_intrinsics: bool = True

    def __post_init__(self):
        if not self.images or len(self.images) != len(self.poses):
            raise ValueError("dataset needs at least one image and one pose per image")
        shapes = {(im.height, im.width) for im in self.images}
        if len(shapes) != 1:
            raise ValueError(f"dataset images differ in size: {sorted(shapes)}")
        for im, pose in zip(self.images, self.poses):
            if (pose.height, pose.width) != (im.height, im.width):
                raise ValueError("pose image size does not match its image")

    def __len__(self) -> int:
        return len(self.images)

    def rays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All rays of all views: origins, directions, target colours."""
        origins, dirs, colors = [], [], []
        for im, pose in zip(self.images, self.poses):
            o, d = pose.rays()
            origins.append(o)
            dirs.append(d)
            colors.append(im.data.reshape(-1, im.channels)[:, :3])
        return np.concatenate(origins), np.concatenate(dirs), np.concatenate(colors)


# Pose file: one JSON object per line,
#   {"image_path": str, "c2w": 4x4 list, "focal_px": float,
#    "width": int, "height": int, "cx": float (optional), "cy": float (optional)}
# image_path is relative to the pose file; .png (sRGB 8-bit) and .pfm (linear) are accepted.

def write_pose_file(path, dataset: PosedDataset, image_dir: str = "images") -> None:
    path = Path(path)
    (path.parent / image_dir).mkdir(parents=True, exist_ok=True)
    lines = []
    for i, (im, pose) in enumerate(zip(dataset.images, dataset.poses)):
        rel = f"{image_dir}/view_{i:03d}.pfm"
        imgio.save_image_pfm(path.parent / rel, im)
        lines.append(json.dumps({"image_path": rel, **pose.to_record()}))
    path.write_text("\n".join(lines) + "\n")


def read_pose_file(path) -> PosedDataset:
    path = Path(path)
    images, poses = [], []
    for n, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            img_path = path.parent / rec["image_path"]
            img = imgio.load_image_pfm(img_path) if img_path.suffix == ".pfm" else imgio.load_png8(img_path)
            pose = CameraPose.from_c2w(rec["c2w"], rec["focal_px"], rec.get("width", img.width),
                                       rec.get("height", img.height), rec.get("cx"), rec.get("cy"))
        except (KeyError, ValueError, TypeError, OSError) as exc:
            raise ValueError(f"{path}:{n}: bad pose record ({exc})") from exc
        images.append(img)
        poses.append(pose)
    return PosedDataset(images, poses)


def convert_transforms(transforms_path, out_path) -> int:
    """Convert a NeRF-style ``transforms.json`` to the JSON-lines pose file. Returns frame count."""
    transforms_path, out_path = Path(transforms_path), Path(out_path)
    meta = json.loads(transforms_path.read_text())
    lines = []
    for frame in meta["frames"]:
        img_path = transforms_path.parent / frame["file_path"]
        if not img_path.suffix:
            img_path = img_path.with_suffix(".png")
        with Image.open(img_path) as im:
            width, height = im.size
        focal = meta.get("fl_x") or 0.5 * width / math.tan(0.5 * meta["camera_angle_x"])
        c2w = np.asarray(frame["transform_matrix"], dtype=np.float64)
        c2w[:3, :3] = orthonormalize(c2w[:3, :3])
        rel = Path(img_path).resolve()
        try:
            rel = rel.relative_to(out_path.parent.resolve())
        except ValueError:
            pass
        lines.append(json.dumps({"image_path": str(rel), "c2w": c2w.tolist(), "focal_px": float(focal),
                                 "width": width, "height": height,
                                 "cx": meta.get("cx"), "cy": meta.get("cy")}))
    out_path.write_text("\n".join(lines) + "\n")
    return len(lines)
