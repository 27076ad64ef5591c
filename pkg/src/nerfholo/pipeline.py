"""End-to-end orchestration: posed images -> radiance field -> novel RGB-D view -> hologram.

Every stage writes its output to the run directory and the next stage reads it back from
disk, so a run resumed from any persisted intermediate produces the same bytes as an
uninterrupted one. Configuration is an INI file whose sections mirror the dataclasses
below; ``PipelineConfig().to_ini()`` is the schema with defaults.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import logging
import math
import time
import typing
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .cgh import (DEFAULT_DISTANCE, DEFAULT_PITCH, DEFAULT_WAVELENGTHS, ClaheParams, RgbdFrame,
                  SynthesisParams, encode_hologram_set, enhance_hologram, synthesize)
from .radiance import (CameraPose, FitOptions, RadianceGrid, RenderOptions, fit, load_checkpoint,
                       normalize_depth, read_pose_file, render_depth, render_view, save_checkpoint)
from .reconstruct import ReconstructionReport, reconstruct_intensity
from .scenes import SCENES, focal_for, generate_synthetic_scene, orbit_pose

log = logging.getLogger(__name__)

STAGES = ("fit", "render", "depth", "synthesize", "encode", "enhance", "reconstruct")


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


class StageError(RuntimeError):
    def __init__(self, stage: str, config_hash: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed (config {config_hash[:12]}): {cause}")
        self.stage = stage
        self.config_hash = config_hash


def _opt(default, help: str):
    return field(default=default, metadata={"help": help})


@dataclass(frozen=True)
class SceneConfig:
    source: str = _opt("spheres", "synthetic scene name (spheres, planes, boxes) or a pose file path")
    n_views: int = _opt(24, "number of synthetic training views")
    resolution: int = _opt(128, "synthetic training view size in pixels (square)")


@dataclass(frozen=True)
class RadianceConfig:
    grid: int = _opt(64, "voxel grid vertices per axis")
    iterations: int = _opt(1500, "optimizer steps")
    learning_rate: float = _opt(0.1, "Adam step size")
    density_lr_scale: float = _opt(100.0, "extra step-size factor for the density channel")
    rays_per_batch: int = _opt(4096, "rays per optimizer step")
    n_samples: int = _opt(128, "samples per ray")
    near: float = _opt(1.0, "ray start distance (scene units)")
    far: float = _opt(4.0, "ray end distance; also the background depth")
    checkpoint: str = _opt("", "load this checkpoint instead of fitting when it exists")
    fit: bool = _opt(True, "fit a new field when no checkpoint is available")


@dataclass(frozen=True)
class HologramConfig:
    pitch: float = _opt(DEFAULT_PITCH, "hologram pixel pitch in meters")
    base_distance: float = _opt(DEFAULT_DISTANCE, "distance from the nearest layer to the hologram in meters")
    layer_spacing: float = _opt(50e-6, "distance between consecutive layers in meters")
    wavelengths: tuple[float, ...] = _opt(DEFAULT_WAVELENGTHS, "red, green, blue wavelengths in meters")
    n_layers: int = _opt(8, "depth slabs")
    carrier: tuple[float, float] = _opt((0.25, 0.25), "linear phase carrier in cycles per pixel (x, y)")
    phase: str = _opt("constant", "initial layer phase: constant or random")
    phase_floor: float = _opt(0.05, "phase regularization offset for double-phase encoding")
    aperture: float = _opt(0.5, "4f pass-band radius as a fraction of Nyquist")


@dataclass(frozen=True)
class ClaheConfig:
    enabled: bool = _opt(True, "apply CLAHE to the encoded holograms")
    tiles: tuple[int, int] = _opt((8, 8), "tile grid (x, y)")
    clip_limit: float = _opt(2.0, "histogram clip limit as a multiple of the mean bin count")
    bins: int = _opt(256, "histogram bins")


@dataclass(frozen=True)
class RunConfig:
    seed: int = _opt(0, "seed for every random draw")
    output_dir: str = _opt("out", "run directory")
    max_width: int = _opt(1920, "largest view width accepted")
    max_height: int = _opt(1080, "largest view height accepted")


_SECTIONS = {"run": RunConfig, "scene": SceneConfig, "radiance": RadianceConfig,
             "hologram": HologramConfig, "clahe": ClaheConfig}


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(text: str, hint, name: str):
    text = text.strip()
    try:
        if hint is bool:
            low = text.lower()
            if low not in ("true", "false", "yes", "no", "1", "0", "on", "off"):
                raise ValueError(f"not a boolean: {text!r}")
            return low in ("true", "yes", "1", "on")
        if hint in (int, float, str):
            return hint(text)
        if typing.get_origin(hint) is tuple:
            args = typing.get_args(hint)
            parts = [p for p in text.replace("x", ",").split(",") if p.strip()] if text else []
            if len(args) == 2 and args[1] is Ellipsis:
                return tuple(args[0](p) for p in parts)
            if len(parts) != len(args):
                raise ValueError(f"expected {len(args)} values, got {len(parts)}")
            return tuple(t(p) for t, p in zip(args, parts))
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from None
    raise ConfigError(f"{name}: unsupported type {hint}")


@dataclass(frozen=True)
class PipelineConfig:
    run: RunConfig = field(default_factory=RunConfig)
    scene: SceneConfig = field(default_factory=SceneConfig)
    radiance: RadianceConfig = field(default_factory=RadianceConfig)
    hologram: HologramConfig = field(default_factory=HologramConfig)
    clahe: ClaheConfig = field(default_factory=ClaheConfig)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        h, r = self.hologram, self.radiance
        positive = {"hologram.pitch": h.pitch, "hologram.base_distance": h.base_distance,
                    "hologram.aperture": h.aperture, "radiance.learning_rate": r.learning_rate,
                    "radiance.density_lr_scale": r.density_lr_scale, "radiance.near": r.near,
                    "clahe.clip_limit": self.clahe.clip_limit}
        positive.update({f"hologram.wavelengths[{i}]": w for i, w in enumerate(h.wavelengths)})
        for name, v in positive.items():
            if not (v > 0 and not math.isnan(v)):
                raise ConfigError(f"{name} must be positive, got {v}")
        if h.layer_spacing < 0 or h.phase_floor < 0:
            raise ConfigError("hologram.layer_spacing and hologram.phase_floor must be >= 0")
        if len(h.wavelengths) != 3:
            raise ConfigError(f"hologram.wavelengths needs three values, got {len(h.wavelengths)}")
        if h.aperture > 1:
            raise ConfigError(f"hologram.aperture must be <= 1, got {h.aperture}")
        if h.phase not in ("constant", "random"):
            raise ConfigError(f"hologram.phase must be constant or random, got {h.phase!r}")
        if any(abs(c) >= 0.5 for c in h.carrier):
            raise ConfigError(f"hologram.carrier {h.carrier} is at or beyond Nyquist")
        if not r.far > r.near:
            raise ConfigError(f"radiance.far ({r.far}) must exceed radiance.near ({r.near})")
        ints = {"hologram.n_layers": h.n_layers, "radiance.grid": r.grid - 1, "radiance.n_samples": r.n_samples - 1,
                "radiance.rays_per_batch": r.rays_per_batch, "scene.n_views": self.scene.n_views,
                "scene.resolution": self.scene.resolution, "clahe.bins": self.clahe.bins - 1,
                "run.max_width": self.run.max_width, "run.max_height": self.run.max_height}
        for name, v in ints.items():
            if v < 1:
                raise ConfigError(f"{name} is too small")
        if r.iterations < 0:
            raise ConfigError("radiance.iterations must be >= 0")
        if min(self.clahe.tiles) < 1:
            raise ConfigError(f"clahe.tiles must be >= 1, got {self.clahe.tiles}")

    def to_ini(self) -> str:
        lines = []
        for section, cls in _SECTIONS.items():
            lines.append(f"[{section}]")
            values = getattr(self, section)
            for f in dataclasses.fields(cls):
                lines.append(f"# {f.metadata['help']}")
                lines.append(f"{f.name} = {_format(getattr(values, f.name))}")
            lines.append("")
        return "\n".join(lines)

    @classmethod
    def from_ini(cls, text: str) -> PipelineConfig:
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=None)
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None
        unknown = set(parser.sections()) - set(_SECTIONS)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        parts = {}
        for section, sub in _SECTIONS.items():
            hints = typing.get_type_hints(sub)
            known = {f.name for f in dataclasses.fields(sub)}
            kwargs = {}
            if parser.has_section(section):
                for key, raw in parser.items(section):
                    if key not in known:
                        raise ConfigError(f"unknown key {section}.{key}")
                    kwargs[key] = _parse(raw, hints[key], f"{section}.{key}")
            parts[section] = sub(**kwargs)
        return cls(**parts)

    @classmethod
    def load(cls, path) -> PipelineConfig:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_ini(text)

    def with_overrides(self, **sections) -> PipelineConfig:
        """``cfg.with_overrides(hologram={"n_layers": 4})``."""
        parts = {}
        for name, changes in sections.items():
            if name not in _SECTIONS:
                raise ConfigError(f"unknown config section {name!r}")
            try:
                parts[name] = dataclasses.replace(getattr(self, name), **changes)
            except TypeError as exc:
                raise ConfigError(str(exc)) from None
        return dataclasses.replace(self, **parts)

    def config_hash(self) -> str:
        """SHA-256 of the canonical INI text; the output directory does not take part."""
        canonical = dataclasses.replace(self, run=dataclasses.replace(self.run, output_dir=""))
        return hashlib.sha256(canonical.to_ini().encode()).hexdigest()


@dataclass(frozen=True)
class ViewRequest:
    """Novel view to synthesize. ``focuses`` adds reconstructions beyond the base distance."""

    pose: CameraPose
    focuses: tuple[float, ...] = ()

    @property
    def resolution(self) -> tuple[int, int]:
        return self.pose.width, self.pose.height

    @classmethod
    def orbit(cls, azimuth: float, elevation: float, width: int = 256, height: int = 256,
              radius: float = 3.0, focuses=()) -> ViewRequest:
        pose = orbit_pose(azimuth, elevation, width, radius)
        if height != width:
            pose = CameraPose(pose.position, pose.rotation, focal_for(width), width, height)
        return cls(pose, tuple(float(f) for f in focuses))


@dataclass
class PipelineResult:
    output_dir: Path
    report: ReconstructionReport
    enhanced_report: ReconstructionReport | None
    focal_reports: list[ReconstructionReport]
    manifest: dict


def _seeds(seed: int) -> dict[str, int]:
    """Independent per-purpose seeds derived from the single run seed."""
    states = np.random.SeedSequence(seed).spawn(3)
    return {name: int(s.generate_state(1)[0]) for name, s in zip(("scene", "fit", "phase"), states)}


def render_options(cfg: PipelineConfig) -> RenderOptions:
    r = cfg.radiance
    return RenderOptions(near=r.near, far=r.far, n_samples=r.n_samples)


def _training_data(cfg: PipelineConfig, seed: int):
    src = cfg.scene.source
    if src in SCENES:
        return generate_synthetic_scene(src, cfg.scene.n_views, cfg.scene.resolution, seed, cfg.radiance.far)
    path = Path(src)
    if not path.exists():
        raise ConfigError(f"scene.source {src!r} is neither a synthetic scene ({', '.join(SCENES)}) "
                          "nor an existing pose file")
    return read_pose_file(path)


def obtain_field(cfg: PipelineConfig, out: Path) -> RadianceGrid:
    """Load the configured checkpoint or fit a new grid (saved as ``radiance.hfrg``)."""
    r = cfg.radiance
    if r.checkpoint and Path(r.checkpoint).exists():
        return load_checkpoint(r.checkpoint)
    if not r.fit:
        raise ConfigError(f"no checkpoint at {r.checkpoint!r} and fitting is disabled")
    seeds = _seeds(cfg.run.seed)
    data = _training_data(cfg, seeds["scene"])
    grid = RadianceGrid((r.grid,) * 3)
    opts = FitOptions(iterations=r.iterations, learning_rate=r.learning_rate,
                      density_lr_scale=r.density_lr_scale, rays_per_batch=r.rays_per_batch,
                      seed=seeds["fit"], render=render_options(cfg))
    report = fit(grid, data, opts)
    log.info("fit: %d iterations, train psnr %.2f dB", r.iterations, report.final_train_psnr)
    save_checkpoint(out / "radiance.hfrg", grid)
    return grid


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _stage_render(field, cfg, request, out):
    view = render_view(field, request.pose, render_options(cfg))
    io.save_image_pfm(out / "view.pfm", view)
    io.save_png8(out / "view.png", view)


def _stage_depth(field, cfg, request, out):
    opts = render_options(cfg)
    depth = render_depth(field, request.pose, opts)
    io.save_image_pfm(out / "depth.pfm", depth)
    io.save_png16(out / "depth.png", normalize_depth(depth, opts.near, opts.far).channel(0))


def _stage_synthesize(cfg, out):
    view = io.load_image_pfm(out / "view.pfm")
    depth = io.load_image_pfm(out / "depth.pfm")
    r, h = cfg.radiance, cfg.hologram
    frame = RgbdFrame(view, depth, r.near, r.far)
    params = SynthesisParams(pitch=h.pitch, wavelengths=h.wavelengths, base_distance=h.base_distance,
                             layer_spacing=h.layer_spacing, phase=h.phase, fit_depth_range=True,
                             seed=_seeds(cfg.run.seed)["phase"])
    hset = synthesize(frame, h.n_layers, params)
    io.save_hologram_set(out, hset, "hologram_complex")


def _stage_encode(cfg, out):
    hset = io.load_hologram_set(out / "hologram_complex.json")
    h = cfg.hologram
    encoded = encode_hologram_set(hset, h.carrier, quantize=True, phase_floor=h.phase_floor)
    io.save_hologram_set(out, encoded, "hologram")


def _stage_enhance(cfg, out):
    if not cfg.clahe.enabled:
        return
    hset = io.load_hologram_set(out / "hologram.json")
    c = cfg.clahe
    enhanced = enhance_hologram(hset, ClaheParams(c.tiles, c.clip_limit, c.bins))
    io.save_hologram_set(out, enhanced, "hologram_enhanced")


def _mm(z: float) -> str:
    return f"{z * 1e3:.4g}mm"


def _stage_reconstruct(cfg, request, out):
    reference = io.load_image_pfm(out / "view.pfm")
    aperture = cfg.hologram.aperture
    focus = cfg.hologram.base_distance
    hset = io.load_hologram_set(out / "hologram.json")
    report = reconstruct_intensity(hset, focus, reference, aperture=aperture)
    io.save_png8(out / "recon.png", report.composite)
    io.save_image_pfm(out / "recon.pfm", report.composite)

    enhanced = None
    if cfg.clahe.enabled:
        ehset = io.load_hologram_set(out / "hologram_enhanced.json")
        enhanced = reconstruct_intensity(ehset, focus, reference, aperture=aperture)
        io.save_png8(out / "recon_enhanced.png", enhanced.composite)
        io.save_image_pfm(out / "recon_enhanced.pfm", enhanced.composite)

    focal = []
    for z in request.focuses:
        rep = reconstruct_intensity(hset, z, reference, aperture=aperture)
        io.save_png8(out / f"recon_{_mm(z)}.png", rep.composite)
        focal.append(rep)

    payload = {"focus": report.to_dict(),
               "enhanced": enhanced.to_dict() if enhanced else None,
               "focal_stack": [r.to_dict() for r in focal]}
    _write_json(out / "report.json", payload)
    return report, enhanced, focal


def run(config: PipelineConfig, request: ViewRequest, field=None, start: str = "fit") -> PipelineResult:
    """Run the pipeline from stage ``start`` onwards into ``config.run.output_dir``.

    ``field`` supplies an already fitted radiance field and skips fitting. Starting after
    ``depth`` needs the earlier artifacts in the run directory; starting at ``render`` or
    ``depth`` needs a ``field`` or a loadable checkpoint.
    """
    if start not in STAGES:
        raise ConfigError(f"unknown stage {start!r}; choose from {STAGES}")
    w, h = request.resolution
    if w > config.run.max_width or h > config.run.max_height:
        raise ConfigError(f"requested {w}x{h} exceeds the configured maximum "
                          f"{config.run.max_width}x{config.run.max_height}")
    out = Path(config.run.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    chash = config.config_hash()
    (out / "config.ini").write_text(config.to_ini())
    first = STAGES.index(start)
    timings: dict[str, float] = {}
    result = None

    def stage(name, fn, *args):
        if STAGES.index(name) < first:
            return None
        t0 = time.perf_counter()
        try:
            value = fn(*args)
        except ConfigError:
            raise
        except Exception as exc:
            raise StageError(name, chash, exc) from exc
        timings[name] = time.perf_counter() - t0
        log.info("stage %-11s %8.3f s", name, timings[name])
        return value

    if first <= STAGES.index("depth") and field is None:
        field = stage("fit", obtain_field, config, out) if first == 0 else obtain_field(config, out)
    stage("render", _stage_render, field, config, request, out)
    stage("depth", _stage_depth, field, config, request, out)
    stage("synthesize", _stage_synthesize, config, out)
    stage("encode", _stage_encode, config, out)
    stage("enhance", _stage_enhance, config, out)
    result = stage("reconstruct", _stage_reconstruct, config, request, out)
    report, enhanced, focal = result

    after_fit = sum(v for k, v in timings.items() if k != "fit")
    log.info("view to reconstruction: %.2f s", after_fit)
    artifacts = sorted(p.name for p in out.iterdir() if p.is_file() and p.name != "manifest.json")
    manifest = {"config_hash": chash, "seed": config.run.seed, "derived_seeds": _seeds(config.run.seed),
                "start_stage": start, "timings_s": timings, "pose": request.pose.to_record(),
                "focuses": list(request.focuses), "artifacts": artifacts}
    _write_json(out / "manifest.json", manifest)
    return PipelineResult(out, report, enhanced, focal, manifest)
