from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .camera import PosedDataset
from . import _kernels
from .render import RenderOptions, backward_rays, render_rays, sample_distances, uses_kernel

log = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    """Training loss became NaN or infinite."""


@dataclass(frozen=True)
class FitOptions:
    iterations: int = 1500
    learning_rate: float = 0.1
    final_lr_ratio: float = 0.1
    rays_per_batch: int = 4096
    seed: int = 0
    tv_weight: float = 0.0
    density_lr_scale: float = 100.0
    render: RenderOptions = field(default_factory=RenderOptions)
    log_every: int = 100


@dataclass
class FitReport:
    losses: list[float]
    smoothed: list[float]
    final_train_psnr: float
    seconds: float

    @property
    def smoothed_decreased(self) -> bool:
        return len(self.smoothed) > 1 and self.smoothed[-1] < self.smoothed[0]


class Adam:
    """Adam with an optional per-parameter learning-rate multiplier (any array that
    broadcasts against the parameter)."""

    def __init__(self, params: dict[str, np.ndarray], lr: float, betas=(0.9, 0.99), eps: float = 1e-8,
                 scales: dict | None = None):
        self.params = params
        self.lr = lr
        self.scales = scales or {}
        self.b1, self.b2 = betas
        self.eps = eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.step_count = 0

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.step_count += 1
        c1 = 1 - self.b1**self.step_count
        c2 = 1 - self.b2**self.step_count
        for k, g in grads.items():
            m, v = self.m[k], self.v[k]
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            step = self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            if k in self.scales:
                step *= self.scales[k]
            self.params[k] -= step


def batch_loss_and_grads(field, origins, dirs, colors, opts: RenderOptions,
                         rng: np.random.Generator | None = None, reference: bool = False):
    """Mean squared error of a ray batch and its gradient w.r.t. every field parameter."""
    if uses_kernel(field, reference):
        t = sample_distances(len(origins), opts, rng)
        rgb, _, _, grad = _kernels.grid_render(field, origins, dirs, t, opts.spacing,
                                               targets=colors, grad_scale=2.0 / (3 * len(origins)))
        return float(np.mean((rgb - colors) ** 2)), {"grid": grad}
    batch = render_rays(field, origins, dirs, opts, rng, keep_cache=True)
    diff = batch.rgb - colors
    value = float(np.mean(diff**2))
    grads = backward_rays(field, batch, 2.0 * diff / diff.size)
    return value, grads


def fit(field, data: PosedDataset, opts: FitOptions = FitOptions()) -> FitReport:
    """Fit ``field`` in place to the posed images by minimising per-batch mean squared error.

    Ray batches and sample jitter come from one generator seeded with ``opts.seed``, so two
    runs with equal inputs produce identical loss curves. The learning rate decays
    exponentially to ``final_lr_ratio`` of its initial value.
    """
    origins, dirs, colors = data.rays()
    rng = np.random.default_rng(opts.seed)
    scales = None
    if hasattr(field, "density_lr_scales"):
        scales = field.density_lr_scales(opts.density_lr_scale)
    optim = Adam(field.parameters(), opts.learning_rate, scales=scales)
    decay = opts.final_lr_ratio ** (1.0 / max(opts.iterations, 1))
    use_tv = opts.tv_weight > 0 and hasattr(field, "tv_loss_and_grad")

    losses, smoothed = [], []
    ema = None
    start = time.perf_counter()
    for it in range(opts.iterations):
        idx = rng.integers(0, len(origins), size=opts.rays_per_batch)
        value, grads = batch_loss_and_grads(field, origins[idx], dirs[idx], colors[idx], opts.render, rng)
        if not math.isfinite(value):
            raise DivergenceError(
                f"loss became {value} at iteration {it} (learning rate {optim.lr:.3g}); "
                "lower the learning rate")
        if use_tv:
            _, tv_grads = field.tv_loss_and_grad()
            for k, g in tv_grads.items():
                grads[k] += opts.tv_weight * g
        optim.step(grads)
        optim.lr *= decay

        losses.append(value)
        ema = value if ema is None else 0.95 * ema + 0.05 * value
        smoothed.append(ema)
        if opts.log_every and (it + 1) % opts.log_every == 0:
            log.info("iter %d  loss %.3e  psnr %.2f dB", it + 1, ema, -10 * math.log10(max(ema, 1e-20)))

    final = float(np.mean(losses[-max(1, len(losses) // 20):])) if losses else float("nan")
    return FitReport(losses, smoothed, -10 * math.log10(max(final, 1e-20)), time.perf_counter() - start)
