"""Fused voxel-grid render/backward loops compiled with numba.

Same quadrature and gradients as :mod:`.render` (which stays the reference path); serial
loops keep gradient accumulation order, and therefore results, deterministic.
"""

from __future__ import annotations

import math

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None


def _grid_rays(params, res, lo, hi, origins, dirs, t, delta, grad_rgb_scale, targets, grad,
               out_rgb, out_trans, out_depth, compute_grad):
    nx, ny, nz = res[0], res[1], res[2]
    sx = (nx - 1) / (hi[0] - lo[0])
    sy = (ny - 1) / (hi[1] - lo[1])
    sz = (nz - 1) / (hi[2] - lo[2])
    n_rays, n_samples = t.shape
    # per-sample scratch for the backward sweep
    cr = np.empty(n_samples)
    cg = np.empty(n_samples)
    cb = np.empty(n_samples)
    wts = np.empty(n_samples)
    tnext = np.empty(n_samples)
    dsig = np.empty(n_samples)
    inside = np.empty(n_samples, np.bool_)
    base = np.empty(n_samples, np.int64)
    fx = np.empty(n_samples)
    fy = np.empty(n_samples)
    fz = np.empty(n_samples)
    stride_x = ny * nz
    stride_y = nz
    for r in range(n_rays):
        trans = 1.0
        rr = 0.0
        gg = 0.0
        bb = 0.0
        acc = 0.0
        dep = 0.0
        for s in range(n_samples):
            ts = t[r, s]
            px = origins[r, 0] + ts * dirs[r, 0]
            py = origins[r, 1] + ts * dirs[r, 1]
            pz = origins[r, 2] + ts * dirs[r, 2]
            if (px < lo[0] or px > hi[0] or py < lo[1] or py > hi[1] or pz < lo[2] or pz > hi[2]):
                inside[s] = False
                wts[s] = 0.0
                tnext[s] = trans
                cr[s] = 0.0
                cg[s] = 0.0
                cb[s] = 0.0
                continue
            inside[s] = True
            gx = (px - lo[0]) * sx
            gy = (py - lo[1]) * sy
            gz = (pz - lo[2]) * sz
            ix = min(max(int(math.floor(gx)), 0), nx - 2)
            iy = min(max(int(math.floor(gy)), 0), ny - 2)
            iz = min(max(int(math.floor(gz)), 0), nz - 2)
            ax = gx - ix
            ay = gy - iy
            az = gz - iz
            b0 = ix * stride_x + iy * stride_y + iz
            base[s] = b0
            fx[s] = ax
            fy[s] = ay
            fz[s] = az
            v0 = 0.0
            v1 = 0.0
            v2 = 0.0
            v3 = 0.0
            for c in range(8):
                ox = (c >> 2) & 1
                oy = (c >> 1) & 1
                oz = c & 1
                w = (ax if ox else 1.0 - ax) * (ay if oy else 1.0 - ay) * (az if oz else 1.0 - az)
                idx = b0 + ox * stride_x + oy * stride_y + oz
                v0 += w * params[idx, 0]
                v1 += w * params[idx, 1]
                v2 += w * params[idx, 2]
                v3 += w * params[idx, 3]
            # softplus / sigmoid
            if v0 > 0:
                sigma = v0 + math.log1p(math.exp(-v0))
            else:
                sigma = math.log1p(math.exp(v0))
            dsig[s] = 0.5 * (1.0 + math.tanh(0.5 * v0))
            c1 = 0.5 * (1.0 + math.tanh(0.5 * v1))
            c2 = 0.5 * (1.0 + math.tanh(0.5 * v2))
            c3 = 0.5 * (1.0 + math.tanh(0.5 * v3))
            tau = sigma * delta
            alpha = -math.expm1(-tau)
            w_s = trans * alpha
            rr += w_s * c1
            gg += w_s * c2
            bb += w_s * c3
            acc += w_s
            dep += w_s * ts
            trans = trans * math.exp(-tau)
            wts[s] = w_s
            tnext[s] = trans
            cr[s] = c1
            cg[s] = c2
            cb[s] = c3
        out_rgb[r, 0] = rr
        out_rgb[r, 1] = gg
        out_rgb[r, 2] = bb
        out_trans[r] = trans
        out_depth[r] = dep / max(acc, 1e-10)
        if not compute_grad:
            continue

        g0 = grad_rgb_scale * (rr - targets[r, 0])
        g1 = grad_rgb_scale * (gg - targets[r, 1])
        g2 = grad_rgb_scale * (bb - targets[r, 2])
        total = rr * g0 + gg * g1 + bb * g2
        running = 0.0
        for s in range(n_samples):
            if not inside[s]:
                continue
            dot = cr[s] * g0 + cg[s] * g1 + cb[s] * g2
            running += wts[s] * dot
            after = total - running
            d_sigma_raw = delta * (tnext[s] * dot - after) * dsig[s]
            w_s = wts[s]
            d1 = w_s * g0 * cr[s] * (1.0 - cr[s])
            d2 = w_s * g1 * cg[s] * (1.0 - cg[s])
            d3 = w_s * g2 * cb[s] * (1.0 - cb[s])
            ax = fx[s]
            ay = fy[s]
            az = fz[s]
            b0 = base[s]
            for c in range(8):
                ox = (c >> 2) & 1
                oy = (c >> 1) & 1
                oz = c & 1
                w = (ax if ox else 1.0 - ax) * (ay if oy else 1.0 - ay) * (az if oz else 1.0 - az)
                idx = b0 + ox * stride_x + oy * stride_y + oz
                grad[idx, 0] += w * d_sigma_raw
                grad[idx, 1] += w * d1
                grad[idx, 2] += w * d2
                grad[idx, 3] += w * d3


if numba is not None:
    _grid_rays_jit = numba.njit(cache=True, fastmath=False)(_grid_rays)
else:  # pragma: no cover
    _grid_rays_jit = None

AVAILABLE = numba is not None


def grid_render(grid, origins, dirs, t, delta, targets=None, grad_scale=0.0):
    """Run the fused kernel. With ``targets`` also return the gradient of
    ``grad_scale / 2 * sum((rgb - targets)^2)`` w.r.t. the grid parameters."""
    n = len(origins)
    rgb = np.empty((n, 3))
    trans = np.empty(n)
    depth = np.empty(n)
    params = grid.params.reshape(-1, 4)
    compute = targets is not None
    grad = np.zeros_like(params) if compute else np.zeros((1, 4))
    tg = np.ascontiguousarray(targets, dtype=np.float64) if compute else np.zeros((1, 3))
    _grid_rays_jit(params, np.asarray(grid.resolution, np.int64), grid.bounds[0].copy(), grid.bounds[1].copy(),
                   np.ascontiguousarray(origins, np.float64), np.ascontiguousarray(dirs, np.float64),
                   np.ascontiguousarray(t, np.float64), float(delta), float(grad_scale), tg, grad,
                   rgb, trans, depth, compute)
    return rgb, trans, depth, (grad.reshape(grid.params.shape) if compute else None)
