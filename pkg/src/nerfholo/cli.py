"""Command-line entry point: ``nerfholo <command> ...``.

Exit status: 0 success, 2 bad arguments or configuration, 3 a processing stage failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import io
from .bench import DEFAULT_SIZES, OPS, format_table, parse_size, run_bench
from .cgh import (DEFAULT_DISTANCE, DEFAULT_PITCH, ClaheParams, RgbdFrame,
                  SynthesisParams, encode_hologram_set, enhance_hologram, synthesize)
from .pipeline import STAGES, ConfigError, PipelineConfig, StageError, ViewRequest, run
from .radiance import (FitOptions, RadianceGrid, RenderOptions, convert_transforms, fit, load_checkpoint,
                       normalize_depth, read_pose_file, render_view_and_depth, save_checkpoint,
                       write_pose_file)
from .reconstruct import focal_stack
from .scenes import SCENES, generate_synthetic_scene

EXIT_OK, EXIT_CONFIG, EXIT_STAGE = 0, 2, 3
log = logging.getLogger("nerfholo")


def _tiles(text: str) -> tuple[int, int]:
    try:
        tx, ty = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"tiles must look like TXxTY, got {text!r}") from None
    if tx < 1 or ty < 1:
        raise argparse.ArgumentTypeError("tile counts must be >= 1")
    return tx, ty


def _size(text: str) -> tuple[int, int]:
    try:
        return parse_size(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _pair(text: str) -> tuple[float, float]:
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}") from None
    return a, b


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _add_clahe_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--clahe-tiles", type=_tiles, help="CLAHE tile grid, e.g. 8x8")
    p.add_argument("--clahe-clip", type=_positive, help="CLAHE clip limit (inf disables clipping)")
    p.add_argument("--clahe-bins", type=int, help="CLAHE histogram bins")


def _add_view_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--azimuth", type=float, default=0.4, help="camera azimuth in radians")
    p.add_argument("--elevation", type=float, default=0.3, help="camera elevation in radians")
    p.add_argument("--radius", type=float, default=3.0, help="camera distance from the origin")
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--height", type=int, default=256)


def _load_dataset(source: str, views: int, res: int, seed: int):
    if source in SCENES:
        return generate_synthetic_scene(source, views, res, seed)
    return read_pose_file(source)


def cmd_fit(args) -> int:
    data = _load_dataset(args.scene, args.views, args.res, args.seed)
    grid = RadianceGrid((args.grid,) * 3)
    opts = FitOptions(iterations=args.iterations, learning_rate=args.lr, seed=args.seed,
                      rays_per_batch=args.batch, density_lr_scale=args.density_lr_scale,
                      render=RenderOptions(args.near, args.far, args.samples))
    report = fit(grid, data, opts)
    save_checkpoint(args.out, grid)
    print(json.dumps({"checkpoint": str(args.out), "iterations": args.iterations,
                      "train_psnr_db": report.final_train_psnr, "seconds": report.seconds}))
    return EXIT_OK


def cmd_render(args) -> int:
    grid = load_checkpoint(args.checkpoint)
    req = ViewRequest.orbit(args.azimuth, args.elevation, args.width, args.height, args.radius)
    opts = RenderOptions(args.near, args.far, args.samples)
    view, depth = render_view_and_depth(grid, req.pose, opts)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.save_image_pfm(out / "view.pfm", view)
    io.save_png8(out / "view.png", view)
    io.save_image_pfm(out / "depth.pfm", depth)
    io.save_png16(out / "depth.png", normalize_depth(depth, opts.near, opts.far).channel(0))
    print(json.dumps({"view": str(out / "view.png"), "depth": str(out / "depth.pfm")}))
    return EXIT_OK


def _clahe_params(args) -> ClaheParams:
    d = ClaheParams()
    return ClaheParams(args.clahe_tiles or d.tiles,
                       d.clip_limit if args.clahe_clip is None else args.clahe_clip,
                       args.clahe_bins or d.bins)


def cmd_holo(args) -> int:
    view = io.load_image_pfm(args.view)
    depth = io.load_image_pfm(args.depth)
    frame = RgbdFrame(view, depth, args.near, args.far)
    params = SynthesisParams(pitch=args.pitch, base_distance=args.distance, layer_spacing=args.layer_spacing,
                             phase=args.phase, seed=args.seed, fit_depth_range=True)
    hset = encode_hologram_set(synthesize(frame, args.layers, params), args.carrier, quantize=True,
                               phase_floor=args.phase_floor)
    out = Path(args.out_dir)
    written = [io.save_hologram_set(out, hset, "hologram")]
    if not args.no_clahe:
        written.append(io.save_hologram_set(out, enhance_hologram(hset, _clahe_params(args)), "hologram_enhanced"))
    print(json.dumps({"holograms": [str(p) for p in written]}))
    return EXIT_OK


def _load_reference(path):
    if path is None:
        return None
    return io.load_image_pfm(path) if str(path).endswith(".pfm") else io.load_png8(path)


def cmd_recon(args) -> int:
    hset = io.load_hologram_set(args.hologram)
    reference = _load_reference(args.reference)
    reports = focal_stack(hset, args.focus, reference, aperture=args.aperture)
    out = Path(args.out_dir) if args.out_dir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
        for rep in reports:
            io.save_png8(out / f"recon_{rep.focus * 1e3:.4g}mm.png", rep.composite)
    payload = {"hologram": str(args.hologram), "reports": [r.to_dict() for r in reports]}
    text = json.dumps(payload, indent=2)
    if out:
        (out / "report.json").write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    overrides: dict[str, dict] = {}
    if args.output_dir:
        overrides.setdefault("run", {})["output_dir"] = args.output_dir
    if args.seed is not None:
        overrides.setdefault("run", {})["seed"] = args.seed
    if args.checkpoint:
        overrides.setdefault("radiance", {})["checkpoint"] = args.checkpoint
    if args.layers:
        overrides.setdefault("hologram", {})["n_layers"] = args.layers
    for flag, key in (("clahe_tiles", "tiles"), ("clahe_clip", "clip_limit"), ("clahe_bins", "bins")):
        if getattr(args, flag) is not None:
            overrides.setdefault("clahe", {})[key] = getattr(args, flag)
    if overrides:
        cfg = cfg.with_overrides(**overrides)
    if args.print_config:
        print(cfg.to_ini(), end="")
        return EXIT_OK
    req = ViewRequest.orbit(args.azimuth, args.elevation, args.width, args.height, args.radius, args.focus or ())
    result = run(cfg, req, start=args.start)
    summary = {"output_dir": str(result.output_dir), "config_hash": result.manifest["config_hash"],
               "psnr_db": result.report.to_dict()["psnr_db"], "timings_s": result.manifest["timings_s"]}
    print(json.dumps(summary))
    return EXIT_OK


def cmd_bench(args) -> int:
    rows = run_bench(args.ops, args.sizes, args.repeat, args.layers)
    print(json.dumps(rows) if args.format == "json" else format_table(rows))
    return EXIT_OK


def cmd_scene(args) -> int:
    data = generate_synthetic_scene(args.name, args.views, args.res, args.seed)
    out = Path(args.out)
    write_pose_file(out, data)
    depth_dir = out.parent / "depths"
    depth_dir.mkdir(parents=True, exist_ok=True)
    for i, d in enumerate(data.depths):
        io.save_image_pfm(depth_dir / f"view_{i:03d}.pfm", d)
    print(json.dumps({"pose_file": str(out), "views": len(data)}))
    return EXIT_OK


def cmd_convert(args) -> int:
    n = convert_transforms(args.transforms, args.out)
    print(json.dumps({"pose_file": str(args.out), "frames": n}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nerfholo", description="Radiance fields to full-colour holograms.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log stage progress")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a voxel radiance field to posed images")
    p.add_argument("--scene", default="spheres", help=f"one of {', '.join(SCENES)} or a pose file")
    p.add_argument("--views", type=int, default=24)
    p.add_argument("--res", type=int, default=128)
    p.add_argument("--grid", type=int, default=64)
    p.add_argument("--iterations", type=int, default=1500)
    p.add_argument("--lr", type=_positive, default=0.1)
    p.add_argument("--density-lr-scale", type=_positive, default=100.0)
    p.add_argument("--batch", type=int, default=4096)
    p.add_argument("--samples", type=int, default=128)
    p.add_argument("--near", type=float, default=1.0)
    p.add_argument("--far", type=float, default=4.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="checkpoint path (.hfrg)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("render", help="render a novel view and depth map from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    _add_view_flags(p)
    p.add_argument("--near", type=float, default=1.0)
    p.add_argument("--far", type=float, default=4.0)
    p.add_argument("--samples", type=int, default=128)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("holo", help="synthesize and encode a hologram from an RGB-D pair")
    p.add_argument("--view", required=True, help="linear RGB PFM")
    p.add_argument("--depth", required=True, help="depth PFM in scene units")
    p.add_argument("--near", type=float, default=1.0)
    p.add_argument("--far", type=float, default=4.0)
    p.add_argument("--layers", type=int, default=8)
    p.add_argument("--pitch", type=_positive, default=DEFAULT_PITCH)
    p.add_argument("--distance", type=_positive, default=DEFAULT_DISTANCE)
    p.add_argument("--layer-spacing", type=float, default=50e-6)
    p.add_argument("--carrier", type=_pair, default=(0.25, 0.25), help="cx,cy in cycles per pixel")
    p.add_argument("--phase", choices=("constant", "random"), default="constant")
    p.add_argument("--phase-floor", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-clahe", action="store_true")
    _add_clahe_flags(p)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_holo)

    p = sub.add_parser("recon", help="reconstruct a saved hologram at one or more focus distances")
    p.add_argument("--hologram", required=True, help="hologram sidecar JSON")
    p.add_argument("--focus", type=float, nargs="+", default=[DEFAULT_DISTANCE], help="meters")
    p.add_argument("--reference", help="reference image (PFM linear or PNG sRGB) for PSNR")
    p.add_argument("--aperture", type=float, default=0.5)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_recon)

    p = sub.add_parser("pipeline", help="novel view -> depth -> hologram -> reconstruction")
    p.add_argument("--config", help="INI config file (see --print-config)")
    p.add_argument("--print-config", action="store_true", help="print the effective config and exit")
    p.add_argument("--output-dir")
    p.add_argument("--seed", type=int)
    p.add_argument("--checkpoint", help="use this radiance checkpoint instead of fitting")
    p.add_argument("--layers", type=int)
    p.add_argument("--start", choices=STAGES, default="fit", help="resume from this stage")
    p.add_argument("--focus", type=float, nargs="*", help="extra reconstruction distances (meters)")
    _add_view_flags(p)
    _add_clahe_flags(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("bench", help="time fft2, propagate and synthesize")
    p.add_argument("--ops", nargs="+", choices=OPS, default=list(OPS))
    p.add_argument("--sizes", nargs="+", type=_size, default=list(DEFAULT_SIZES), help="WIDTHxHEIGHT")
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--layers", type=int, default=4, help="layers for the synthesize workload")
    p.add_argument("--format", choices=("tsv", "json"), default="tsv")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("scene", help="write a synthetic posed dataset with exact depth")
    p.add_argument("name", choices=SCENES)
    p.add_argument("--views", type=int, default=24)
    p.add_argument("--res", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="pose file path (JSON lines)")
    p.set_defaults(func=cmd_scene)

    p = sub.add_parser("convert-transforms", help="convert a transforms.json capture to a pose file")
    p.add_argument("transforms")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_convert)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
