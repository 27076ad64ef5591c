"""Radiance field parameterizations with hand-written backward passes.

Both fields map world points inside their bounds to four pre-activation channels
``[density, r, g, b]``; the renderer applies softplus to density and sigmoid to colour.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .encoding import EncodingConfig, positional_encode

DENSITY_INIT = -6.0  # softplus ~ 2.5e-3: near-empty start, no fog to unlearn
COLOR_INIT = 0.0
EMPTY_DENSITY = -1000.0  # softplus underflows to exactly 0


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def inverse_softplus(y: float) -> float:
    if y <= 0:
        return EMPTY_DENSITY
    return float(y + np.log(-np.expm1(-y)))


def logit(y: float) -> float:
    y = min(max(y, 1e-12), 1 - 1e-12)
    return float(np.log(y / (1 - y)))


def default_bounds() -> np.ndarray:
    return np.array([[-1.0, -1.0, -1.0], [1.0, 1.0, 1.0]])


@dataclass(eq=False)
class RadianceGrid:
    """Trainable voxel grid; values live on the ``Nx x Ny x Nz`` vertices spanning ``bounds``
    and are trilinearly interpolated (pre-activation) between them."""

    resolution: tuple[int, int, int]
    bounds: np.ndarray = field(default_factory=default_bounds)
    params: np.ndarray | None = None

    def __post_init__(self):
        self.resolution = tuple(int(n) for n in self.resolution)
        if len(self.resolution) != 3 or min(self.resolution) < 2:
            raise ValueError(f"grid resolution must be three values >= 2, got {self.resolution}")
        self.bounds = np.asarray(self.bounds, dtype=np.float64).reshape(2, 3)
        if not np.all(self.bounds[1] > self.bounds[0]):
            raise ValueError("grid bounds must satisfy lo < hi on every axis")
        if self.params is None:
            self.params = np.empty(self.resolution + (4,))
            self.params[..., 0] = DENSITY_INIT
            self.params[..., 1:] = COLOR_INIT
        else:
            self.params = np.asarray(self.params, dtype=np.float64)
            if self.params.shape != self.resolution + (4,):
                raise ValueError(f"params shape {self.params.shape} does not match {self.resolution}")
        nx, ny, nz = self.resolution
        self._strides = np.array([ny * nz, nz, 1])
        self._corners = np.array([[i, j, k] for i in (0, 1) for j in (0, 1) for k in (0, 1)])
        self._offsets = self._corners @ self._strides

    @classmethod
    def filled(cls, resolution, bounds=None, density: float = 0.0, color=(0.5, 0.5, 0.5)) -> RadianceGrid:
        """Grid with uniform activated density and colour."""
        g = cls(resolution, default_bounds() if bounds is None else bounds)
        g.params[..., 0] = inverse_softplus(density)
        g.params[..., 1:] = [logit(c) for c in color]
        return g

    def density_lr_scales(self, scale: float) -> dict[str, np.ndarray]:
        """Learning-rate multipliers that speed up the density channel only."""
        return {"grid": np.array([scale, 1.0, 1.0, 1.0])}

    def parameters(self) -> dict[str, np.ndarray]:
        return {"grid": self.params}

    def vertex_coords(self) -> np.ndarray:
        """World coordinates of every vertex, shape ``resolution + (3,)``."""
        axes = [np.linspace(self.bounds[0, a], self.bounds[1, a], self.resolution[a]) for a in range(3)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def set_region(self, mask: np.ndarray, density: float, color) -> None:
        self.params[mask, 0] = inverse_softplus(density)
        self.params[mask, 1:] = [logit(c) for c in color]

    def inside(self, pts: np.ndarray) -> np.ndarray:
        return np.all((pts >= self.bounds[0]) & (pts <= self.bounds[1]), axis=-1)

    def query(self, pts: np.ndarray):
        """Interpolated raw values ``(M, 4)`` at points already known to be inside the bounds."""
        res = np.array(self.resolution)
        g = (pts - self.bounds[0]) / (self.bounds[1] - self.bounds[0]) * (res - 1)
        i0 = np.clip(np.floor(g).astype(np.int64), 0, res - 2)
        frac = g - i0
        base = i0 @ self._strides
        flat = self.params.reshape(-1, 4)
        out = np.zeros((len(pts), 4))
        weights = []
        for corner, off in zip(self._corners, self._offsets):
            w = np.prod(np.where(corner, frac, 1.0 - frac), axis=1)
            weights.append(w)
            out += w[:, None] * flat[base + off]
        return out, (base, weights)

    def backward(self, ctx, draw: np.ndarray) -> dict[str, np.ndarray]:
        base, weights = ctx
        size = int(np.prod(self.resolution))
        idx = np.concatenate([base + off for off in self._offsets])
        wts = np.concatenate(weights)
        grad = np.empty((size, 4))
        for ch in range(4):
            grad[:, ch] = np.bincount(idx, weights=wts * np.tile(draw[:, ch], 8), minlength=size)
        return {"grid": grad.reshape(self.params.shape)}

    def tv_loss_and_grad(self, channels=slice(0, 1)) -> tuple[float, dict[str, np.ndarray]]:
        """Mean squared difference between neighbouring vertices (selected channels)."""
        p = self.params[..., channels]
        grad = np.zeros_like(self.params)
        total = 0.0
        for axis in range(3):
            d = np.diff(p, axis=axis)
            total += float(np.sum(d * d))
            gd = 2.0 * d
            lo = [slice(None)] * 4
            hi = [slice(None)] * 4
            lo[axis] = slice(0, -1)
            hi[axis] = slice(1, None)
            gsub = grad[..., channels]
            gsub[tuple(hi)] += gd
            gsub[tuple(lo)] -= gd
            grad[..., channels] = gsub
        n = p.size
        return total / n, {"grid": grad / n}


@dataclass(eq=False)
class MlpField:
    """Small coordinate MLP: positional encoding, two ReLU hidden layers, four raw outputs.

    Inputs are the points rescaled to [-1, 1] inside ``bounds``.
    """

    bounds: np.ndarray = field(default_factory=default_bounds)
    encoding: EncodingConfig = field(default_factory=EncodingConfig)
    width: int = 64
    seed: int = 0
    weights: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.bounds = np.asarray(self.bounds, dtype=np.float64).reshape(2, 3)
        if not self.weights:
            rng = np.random.default_rng(self.seed)
            d_in = self.encoding.output_dim(3)
            dims = [(d_in, self.width), (self.width, self.width), (self.width, 4)]
            for i, (a, b) in enumerate(dims, 1):
                self.weights[f"w{i}"] = rng.normal(0.0, np.sqrt(2.0 / a), size=(a, b))
                self.weights[f"b{i}"] = np.zeros(b)
            self.weights["b3"][0] = DENSITY_INIT

    def parameters(self) -> dict[str, np.ndarray]:
        return self.weights

    def inside(self, pts: np.ndarray) -> np.ndarray:
        return np.all((pts >= self.bounds[0]) & (pts <= self.bounds[1]), axis=-1)

    def query(self, pts: np.ndarray):
        w = self.weights
        x = 2.0 * (pts - self.bounds[0]) / (self.bounds[1] - self.bounds[0]) - 1.0
        e = positional_encode(x, self.encoding)
        z1 = e @ w["w1"] + w["b1"]
        h1 = np.maximum(z1, 0.0)
        z2 = h1 @ w["w2"] + w["b2"]
        h2 = np.maximum(z2, 0.0)
        out = h2 @ w["w3"] + w["b3"]
        return out, (e, z1, h1, z2, h2)

    def backward(self, ctx, draw: np.ndarray) -> dict[str, np.ndarray]:
        e, z1, h1, z2, h2 = ctx
        w = self.weights
        g = {"w3": h2.T @ draw, "b3": draw.sum(0)}
        dz2 = (draw @ w["w3"].T) * (z2 > 0)
        g["w2"], g["b2"] = h1.T @ dz2, dz2.sum(0)
        dz1 = (dz2 @ w["w2"].T) * (z1 > 0)
        g["w1"], g["b1"] = e.T @ dz1, dz1.sum(0)
        return g
