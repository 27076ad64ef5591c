"""Analytically ray-traced synthetic scenes with exact depth.

Every scene lives inside the unit box ``[-1, 1]^3``. Shading is Lambertian under a fixed
directional light plus ambient, so colour does not depend on the viewing direction.
Depth maps are z-depth (distance along the camera axis); background pixels are black with
depth ``far``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .field import RealImage
from .radiance.camera import CameraPose, PosedDataset

LIGHT = np.array([0.45, 0.3, 0.84]) / np.linalg.norm([0.45, 0.3, 0.84])
AMBIENT = 0.3
CAMERA_RADIUS = 3.0
FOV_DEG = 40.0
SCENES = ("spheres", "planes", "boxes")


@dataclass(frozen=True)
class Sphere:
    center: tuple[float, float, float]
    radius: float
    albedo: tuple[float, float, float]

    def intersect(self, o: np.ndarray, d: np.ndarray):
        oc = o - np.asarray(self.center)
        b = np.einsum("ij,ij->i", oc, d)
        c = np.einsum("ij,ij->i", oc, oc) - self.radius**2
        disc = b * b - c
        hit = disc >= 0
        sq = np.sqrt(np.where(hit, disc, 0.0))
        t0, t1 = -b - sq, -b + sq
        t = np.where(t0 > 1e-9, t0, np.where(t1 > 1e-9, t1, np.inf))
        t = np.where(hit, t, np.inf)
        p = o + np.where(np.isfinite(t), t, 0.0)[:, None] * d
        n = (p - np.asarray(self.center)) / self.radius
        return t, n


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle on the plane ``x[axis] == offset`` spanning ``lo..hi`` on the
    other two axes (in increasing axis order)."""

    axis: int
    offset: float
    lo: tuple[float, float]
    hi: tuple[float, float]
    albedo: tuple[float, float, float]

    def intersect(self, o: np.ndarray, d: np.ndarray):
        a = self.axis
        others = [i for i in range(3) if i != a]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (self.offset - o[:, a]) / d[:, a]
        t = np.where(np.isfinite(t) & (t > 1e-9), t, np.inf)
        p = o + np.where(np.isfinite(t), t, 0.0)[:, None] * d
        ok = np.ones(len(o), bool)
        for k, i in enumerate(others):
            ok &= (p[:, i] >= self.lo[k]) & (p[:, i] <= self.hi[k])
        t = np.where(ok, t, np.inf)
        n = np.zeros_like(d)
        n[:, a] = -np.sign(d[:, a])  # two-sided: face the viewer
        return t, n


@dataclass(frozen=True)
class Box:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]
    albedo: tuple[float, float, float]

    def intersect(self, o: np.ndarray, d: np.ndarray):
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / d
            ta = (lo - o) * inv
            tb = (hi - o) * inv
        tmin = np.minimum(ta, tb)
        tmax = np.maximum(ta, tb)
        tmin = np.where(np.isnan(tmin), -np.inf, tmin)
        tmax = np.where(np.isnan(tmax), np.inf, tmax)
        near = tmin.max(axis=1)
        far = tmax.min(axis=1)
        hit = (far >= near) & (far > 1e-9)
        t = np.where(hit, np.where(near > 1e-9, near, far), np.inf)
        axis = np.argmax(tmin, axis=1)
        n = np.zeros_like(d)
        n[np.arange(len(d)), axis] = -np.sign(d[np.arange(len(d)), axis])
        return t, n


def scene_primitives(name: str):
    if name == "spheres":
        return [Sphere((-0.3, -0.25, 0.0), 0.45, (0.9, 0.3, 0.2)),
                Sphere((0.35, 0.35, 0.15), 0.35, (0.2, 0.5, 0.9))]
    if name == "planes":
        return [Rect(0, 0.5, (-0.8, -0.6), (0.0, 0.6), (0.9, 0.2, 0.2)),
                Rect(0, -0.5, (0.0, -0.6), (0.8, 0.6), (0.2, 0.8, 0.3))]
    if name == "boxes":
        return [Box((-0.6, -0.6, -0.5), (0.0, 0.0, 0.1), (0.85, 0.7, 0.2)),
                Box((0.1, 0.05, -0.3), (0.55, 0.6, 0.45), (0.3, 0.4, 0.85))]
    raise ValueError(f"unknown synthetic scene {name!r}; choose from {SCENES}")


def shade(albedo, normal: np.ndarray) -> np.ndarray:
    lambert = np.clip(normal @ LIGHT, 0.0, None)
    return np.asarray(albedo)[None, :] * (AMBIENT + (1 - AMBIENT) * lambert)[:, None]


def trace(primitives, origins: np.ndarray, dirs: np.ndarray):
    """Nearest hit per ray: ``(colour (R, 3), distance along ray (R,), hit mask)``."""
    best = np.full(len(dirs), np.inf)
    color = np.zeros((len(dirs), 3))
    for prim in primitives:
        t, n = prim.intersect(origins, dirs)
        closer = t < best
        if closer.any():
            best = np.where(closer, t, best)
            color[closer] = shade(prim.albedo, n[closer])
    return color, best, np.isfinite(best)


def render_scene(name: str, pose: CameraPose, far: float = 4.0) -> tuple[RealImage, RealImage]:
    """Ground-truth linear RGB and z-depth for one camera."""
    origins, dirs = pose.rays()
    color, t, hit = trace(scene_primitives(name), origins, dirs)
    z = np.where(hit, t * (dirs @ pose.forward), far)
    return (RealImage(np.clip(color, 0, 1).reshape(pose.height, pose.width, 3)),
            RealImage(z.reshape(pose.height, pose.width)))


def focal_for(width: int, fov_deg: float = FOV_DEG) -> float:
    return 0.5 * width / math.tan(math.radians(fov_deg) / 2)


def orbit_pose(azimuth: float, elevation: float, res: int, radius: float = CAMERA_RADIUS) -> CameraPose:
    pos = radius * np.array([math.cos(elevation) * math.cos(azimuth),
                             math.cos(elevation) * math.sin(azimuth),
                             math.sin(elevation)])
    return CameraPose.look_at(pos, (0, 0, 0), focal_for(res), res, res)


def orbit_poses(n_views: int, res: int, seed: int = 0, radius: float = CAMERA_RADIUS) -> list[CameraPose]:
    """Cameras on a sphere around the origin. View 0 sits on the +x axis at zero elevation;
    the rest are evenly spread in azimuth with seeded jitter and elevations in [-0.25, 0.7] rad."""
    rng = np.random.default_rng(seed)
    poses = []
    for i in range(n_views):
        if i == 0:
            az, el = 0.0, 0.0
        else:
            az = 2 * math.pi * i / n_views + rng.uniform(-0.1, 0.1)
            el = rng.uniform(-0.25, 0.7)
        poses.append(orbit_pose(az, el, res, radius))
    return poses


def held_out_pose(n_views: int, res: int, radius: float = CAMERA_RADIUS) -> CameraPose:
    """A view halfway between two training azimuths, not part of any training set."""
    return orbit_pose(math.pi * 3 / n_views, 0.3, res, radius)


def generate_synthetic_scene(name: str, n_views: int, res: int, seed: int = 0,
                             far: float = 4.0) -> PosedDataset:
    """Posed dataset of ``n_views`` ray-traced views with exact depth maps attached."""
    if n_views < 1:
        raise ValueError(f"n_views must be >= 1, got {n_views}")
    scene_primitives(name)
    poses = orbit_poses(n_views, res, seed)
    images, depths = [], []
    for pose in poses:
        rgb, depth = render_scene(name, pose, far)
        images.append(rgb)
        depths.append(depth)
    return PosedDataset(images, poses, depths)
