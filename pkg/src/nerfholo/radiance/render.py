"""Alpha-compositing volume renderer with an analytic backward pass.

``[near, far]`` is cut into ``n_samples`` equal intervals of width ``delta``; each interval is
represented by one sample (its midpoint, or a uniform jitter inside it when training), so
``sum(delta) == far - near`` exactly and a homogeneous medium composites to Beer-Lambert
opacity at any sample count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..field import RealImage
from . import _kernels
from .camera import CameraPose
from .fields import RadianceGrid, sigmoid, softplus

DEPTH_EPS = 1e-10
BACKGROUND_TRANSMITTANCE = 0.99


@dataclass(frozen=True)
class RenderOptions:
    near: float = 0.1
    far: float = 4.0
    n_samples: int = 128
    chunk: int = 8192

    def __post_init__(self):
        if not self.near < self.far:
            raise ValueError(f"near ({self.near}) must be < far ({self.far})")
        if self.n_samples < 2:
            raise ValueError(f"n_samples must be >= 2, got {self.n_samples}")

    @property
    def spacing(self) -> float:
        return (self.far - self.near) / self.n_samples


@dataclass(eq=False)
class RayBatch:
    rgb: np.ndarray            # (R, 3)
    transmittance: np.ndarray  # (R,) light left after the last sample
    depth: np.ndarray          # (R,) expected termination distance along the ray
    weights: np.ndarray | None  # (R, S); None on the fused voxel-grid path
    t: np.ndarray               # (R, S)
    cache: tuple | None = None


def uses_kernel(field, reference: bool = False) -> bool:
    """Whether ``field`` goes through the compiled voxel-grid kernel."""
    return not reference and _kernels.AVAILABLE and type(field) is RadianceGrid


def sample_distances(n_rays: int, opts: RenderOptions, rng: np.random.Generator | None = None) -> np.ndarray:
    """Per-ray sample distances ``(R, S)``: interval midpoints, or uniform jitter with ``rng``."""
    s = opts.n_samples
    u = np.full((n_rays, s), 0.5) if rng is None else rng.uniform(size=(n_rays, s))
    return opts.near + (np.arange(s)[None, :] + u) * opts.spacing


def render_rays(field, origins: np.ndarray, dirs: np.ndarray, opts: RenderOptions,
                rng: np.random.Generator | None = None, keep_cache: bool = False,
                reference: bool = False) -> RayBatch:
    """Composite ``R`` rays through ``field``. ``dirs`` must be unit vectors.

    With ``rng`` the sample inside each interval is jittered uniformly; otherwise the
    interval midpoint is used. Voxel grids use a compiled kernel unless ``keep_cache`` or
    ``reference`` asks for the vectorised path, which also fills ``weights``.
    """
    r = len(origins)
    delta = opts.spacing
    t = sample_distances(r, opts, rng)
    if not keep_cache and uses_kernel(field, reference):
        rgb, t_final, depth, _ = _kernels.grid_render(field, origins, dirs, t, delta)
        return RayBatch(rgb, t_final, depth, None, t)
    pts = origins[:, None, :] + t[:, :, None] * dirs[:, None, :]
    inside = field.inside(pts)

    raw = np.zeros(t.shape + (4,))
    ctx = None
    if inside.any():
        vals, ctx = field.query(pts[inside])
        raw[inside] = vals
    sigma = np.where(inside, softplus(raw[..., 0]), 0.0)
    color = sigmoid(raw[..., 1:])

    tau = sigma * delta
    cum = np.cumsum(tau, axis=1)
    trans = np.exp(-(cum - tau))
    alpha = -np.expm1(-tau)
    w = trans * alpha
    rgb = np.einsum("rs,rsc->rc", w, color)
    acc = w.sum(axis=1)
    t_final = np.exp(-cum[:, -1])
    depth = (w * t).sum(axis=1) / np.maximum(acc, DEPTH_EPS)

    cache = (inside, raw, color, tau, trans, w, ctx, delta) if keep_cache else None
    return RayBatch(rgb, t_final, depth, w, t, cache)


def backward_rays(field, batch: RayBatch, grad_rgb: np.ndarray) -> dict[str, np.ndarray]:
    """Parameter gradients given ``dL/d rgb`` of shape ``(R, 3)``."""
    inside, raw, color, tau, trans, w, ctx, delta = batch.cache
    if ctx is None:
        return {k: np.zeros_like(v) for k, v in field.parameters().items()}
    cg = np.einsum("rsc,rc->rs", color, grad_rgb)
    d_color = w[:, :, None] * grad_rgb[:, None, :]
    d_color_raw = d_color * color * (1.0 - color)

    contrib = w * cg
    after = contrib.sum(axis=1, keepdims=True) - np.cumsum(contrib, axis=1)
    trans_next = trans * np.exp(-tau)
    d_sigma = delta * (trans_next * cg - after)
    d_sigma_raw = d_sigma * sigmoid(raw[..., 0])

    draw = np.concatenate([d_sigma_raw[..., None], d_color_raw], axis=-1)[inside]
    return field.backward(ctx, draw)


def render_ray(field, origin, direction, near: float, far: float, n_samples: int):
    """Single-ray convenience wrapper returning ``(rgb, transmittance, depth)``."""
    d = np.asarray(direction, dtype=np.float64)
    norm = np.linalg.norm(d)
    if not norm > 1e-12:
        raise ValueError("ray direction is zero")
    batch = render_rays(field, np.asarray(origin, float)[None], (d / norm)[None],
                        RenderOptions(near, far, n_samples))
    return batch.rgb[0], float(batch.transmittance[0]), float(batch.depth[0])


def _render_pose(field, pose: CameraPose, opts: RenderOptions, seed: int | None):
    origins, dirs = pose.rays()
    rng = None if seed is None else np.random.default_rng(seed)
    rgb = np.empty((len(dirs), 3))
    depth = np.empty(len(dirs))
    trans = np.empty(len(dirs))
    for start in range(0, len(dirs), opts.chunk):
        sl = slice(start, start + opts.chunk)
        b = render_rays(field, origins[sl], dirs[sl], opts, rng)
        rgb[sl], depth[sl], trans[sl] = b.rgb, b.depth, b.transmittance
    return rgb, depth, trans, dirs


def render_view(field, pose: CameraPose, opts: RenderOptions = RenderOptions(),
                seed: int | None = None) -> RealImage:
    """Linear RGB image of ``field`` seen from ``pose`` (black background).

    Samples sit at interval midpoints unless a ``seed`` asks for jittered sampling.
    """
    rgb, _, _, _ = _render_pose(field, pose, opts, seed)
    return RealImage(np.clip(rgb, 0.0, 1.0).reshape(pose.height, pose.width, 3))


def render_depth(field, pose: CameraPose, opts: RenderOptions = RenderOptions(),
                 seed: int | None = None) -> RealImage:
    """Expected termination depth in meters along the optical axis (z-depth).

    Pixels whose remaining transmittance exceeds 0.99 are background and get ``opts.far``.
    """
    _, depth, trans, dirs = _render_pose(field, pose, opts, seed)
    z = depth * (dirs @ pose.forward)
    z = np.where(trans > BACKGROUND_TRANSMITTANCE, opts.far, np.clip(z, opts.near, opts.far))
    return RealImage(z.reshape(pose.height, pose.width))


def render_view_and_depth(field, pose: CameraPose, opts: RenderOptions = RenderOptions(),
                          seed: int | None = None) -> tuple[RealImage, RealImage]:
    rgb, depth, trans, dirs = _render_pose(field, pose, opts, seed)
    z = depth * (dirs @ pose.forward)
    z = np.where(trans > BACKGROUND_TRANSMITTANCE, opts.far, np.clip(z, opts.near, opts.far))
    return (RealImage(np.clip(rgb, 0.0, 1.0).reshape(pose.height, pose.width, 3)),
            RealImage(z.reshape(pose.height, pose.width)))


def normalize_depth(depth: RealImage, near: float, far: float) -> RealImage:
    return RealImage(np.clip((depth.data - near) / (far - near), 0.0, 1.0))


def loss(rendered: RealImage | np.ndarray, truth: RealImage | np.ndarray) -> float:
    """Mean squared error over all pixels and channels."""
    a = rendered.data if isinstance(rendered, RealImage) else np.asarray(rendered, np.float64)
    b = truth.data if isinstance(truth, RealImage) else np.asarray(truth, np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))
