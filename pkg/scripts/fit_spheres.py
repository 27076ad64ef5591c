"""Fit a voxel grid to the two-sphere scene and score a held-out view.

    python scripts/fit_spheres.py --iterations 1500 --out spheres.hfrg
"""

import argparse
import logging
import time

import numpy as np

from nerfholo.radiance import (FitOptions, RadianceGrid, RenderOptions, fit, render_view_and_depth,
                               save_checkpoint)
from nerfholo.reconstruct import psnr
from nerfholo.scenes import generate_synthetic_scene, held_out_pose, render_scene


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--views", type=int, default=24)
    ap.add_argument("--res", type=int, default=128)
    ap.add_argument("--grid", type=int, default=64)
    ap.add_argument("--iterations", type=int, default=1500)
    ap.add_argument("--lr", type=float, default=0.1)
    ap.add_argument("--batch", type=int, default=4096)
    ap.add_argument("--samples", type=int, default=128)
    ap.add_argument("--tv", type=float, default=0.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    data = generate_synthetic_scene("spheres", args.views, args.res, args.seed)
    ropts = RenderOptions(near=1.0, far=4.0, n_samples=args.samples)
    grid = RadianceGrid((args.grid,) * 3)
    t0 = time.perf_counter()
    report = fit(grid, data, FitOptions(iterations=args.iterations, learning_rate=args.lr,
                                        rays_per_batch=args.batch, seed=args.seed,
                                        tv_weight=args.tv, render=ropts))
    print(f"fit: {report.seconds:.1f} s, train psnr {report.final_train_psnr:.2f} dB")

    pose = held_out_pose(args.views, args.res)
    truth, truth_depth = render_scene("spheres", pose, ropts.far)
    view, depth = render_view_and_depth(grid, pose, ropts)
    fg = truth_depth.data[..., 0] < ropts.far
    mae = np.mean(np.abs(depth.data[..., 0][fg] - truth_depth.data[..., 0][fg]))
    print(f"held-out psnr {psnr(view, truth):.2f} dB, depth MAE {mae:.4f} m "
          f"({mae / ropts.spacing:.2f} sample spacings), total {time.perf_counter() - t0:.1f} s")
    if args.out:
        save_checkpoint(args.out, grid)


if __name__ == "__main__":
    main()
