import dataclasses
import filecmp
import json
import warnings
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nerfholo import io
from nerfholo.cgh import DEFAULT_DISTANCE, DEFAULT_PITCH, DEFAULT_WAVELENGTHS, EmptyForegroundWarning
from nerfholo.pipeline import STAGES, ConfigError, PipelineConfig, StageError, ViewRequest, run
from nerfholo.radiance import RadianceGrid, save_checkpoint
from nerfholo.radiance.fields import EMPTY_DENSITY
from nerfholo.scenes import Sphere, scene_primitives

ROOT = Path(__file__).resolve().parents[1]


def sphere_grid(res=32):
    """Voxel grid painted directly from the analytic spheres; no fitting needed."""
    g = RadianceGrid((res,) * 3)
    g.params[..., 0] = EMPTY_DENSITY
    xyz = g.vertex_coords()
    for prim in scene_primitives("spheres"):
        assert isinstance(prim, Sphere)
        inside = np.linalg.norm(xyz - np.asarray(prim.center), axis=-1) <= prim.radius
        g.set_region(inside, 50.0, prim.albedo)
    return g


def small_config(out, **hologram):
    return PipelineConfig().with_overrides(run={"output_dir": str(out)},
                                           hologram={"n_layers": 4, **hologram},
                                           clahe={"tiles": (4, 4)})


REQUEST = ViewRequest.orbit(0.4, 0.3, 64, 64)


# ---------------------------------------------------------------- configuration

def test_defaults_carry_the_published_parameters():
    h = PipelineConfig().hologram
    assert h.pitch == DEFAULT_PITCH == 8.0e-6
    assert h.base_distance == DEFAULT_DISTANCE == 0.6e-3
    assert h.wavelengths == DEFAULT_WAVELENGTHS == (650e-9, 532e-9, 450e-9)
    assert PipelineConfig().run.max_width == 1920 and PipelineConfig().run.max_height == 1080


def test_committed_schema_matches_defaults():
    assert (ROOT / "configs" / "default.ini").read_text() == PipelineConfig().to_ini()


@given(st.integers(0, 10**6), st.integers(1, 16), st.floats(1.0, 50.0), st.booleans(),
       st.floats(-0.45, 0.45), st.sampled_from(["constant", "random"]))
def test_ini_round_trip(seed, layers, clip, enabled, cx, phase):
    cfg = PipelineConfig().with_overrides(run={"seed": seed}, hologram={"n_layers": layers, "carrier": (cx, 0.1),
                                                                        "phase": phase},
                                          clahe={"clip_limit": clip, "enabled": enabled})
    back = PipelineConfig.from_ini(cfg.to_ini())
    assert back == cfg
    assert back.config_hash() == cfg.config_hash()


def test_hash_ignores_output_dir_only():
    a = PipelineConfig()
    assert a.with_overrides(run={"output_dir": "elsewhere"}).config_hash() == a.config_hash()
    assert a.with_overrides(run={"seed": 1}).config_hash() != a.config_hash()


def test_partial_ini_keeps_defaults():
    cfg = PipelineConfig.from_ini("[hologram]\nn_layers = 3\n[clahe]\ntiles = 2x5\n")
    assert cfg.hologram.n_layers == 3 and cfg.clahe.tiles == (2, 5)
    assert cfg.radiance == PipelineConfig().radiance


@pytest.mark.parametrize("text", [
    "[hologram]\npitch = -1\n",
    "[hologram]\nwavelengths = 1e-7, 2e-7\n",
    "[hologram]\ncarrier = 0.5, 0\n",
    "[hologram]\nphase = speckle\n",
    "[radiance]\nnear = 3\nfar = 2\n",
    "[radiance]\ngrid = many\n",
    "[clahe]\nenabled = maybe\n",
    "[clahe]\ntiles = 0x2\n",
    "[bogus]\nx = 1\n",
    "[run]\ncolour = red\n",
    "no section header\n",
])
def test_invalid_config_rejected(text):
    with pytest.raises(ConfigError):
        PipelineConfig.from_ini(text)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        PipelineConfig.load(tmp_path / "absent.ini")


# ---------------------------------------------------------------- runs

def artifacts(out):
    return sorted(p.name for p in Path(out).iterdir() if p.is_file())


def test_run_writes_every_stage_artifact(tmp_path):
    result = run(small_config(tmp_path), ViewRequest.orbit(0.4, 0.3, 64, 64, focuses=(3e-3,)), sphere_grid())
    names = set(artifacts(tmp_path))
    for name in ("config.ini", "manifest.json", "report.json", "view.pfm", "view.png", "depth.pfm", "depth.png",
                 "hologram_complex.json", "hologram.json", "hologram_r.png", "hologram_enhanced.json",
                 "recon.png", "recon.pfm", "recon_enhanced.png", "recon_3mm.png"):
        assert name in names
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config_hash"] == small_config(tmp_path).config_hash()
    assert set(manifest["timings_s"]) == set(STAGES) - {"fit"}
    assert result.report.psnr > result.focal_reports[0].psnr
    assert PipelineConfig.load(tmp_path / "config.ini") == small_config(tmp_path)


def test_rerun_is_bit_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run(small_config(a, phase="random"), REQUEST, sphere_grid())
    run(small_config(b, phase="random"), REQUEST, sphere_grid())
    names = artifacts(a)
    assert names == artifacts(b)
    # config.ini names its own output directory; the manifest holds wall-clock timings
    compared = [n for n in names if n not in ("manifest.json", "config.ini")]
    match, mismatch, errors = filecmp.cmpfiles(a, b, compared, shallow=False)
    assert not mismatch and not errors
    diff = [x for x, y in zip((a / "config.ini").read_text().splitlines(),
                              (b / "config.ini").read_text().splitlines()) if x != y]
    assert len(diff) == 1 and diff[0].startswith("output_dir")


def test_different_seed_changes_random_phase_hologram(tmp_path):
    run(small_config(tmp_path / "a", phase="random"), REQUEST, sphere_grid())
    cfg = small_config(tmp_path / "b", phase="random").with_overrides(run={"seed": 5, "output_dir": str(tmp_path / "b")})
    run(cfg, REQUEST, sphere_grid())
    assert not filecmp.cmp(tmp_path / "a" / "hologram_g.png", tmp_path / "b" / "hologram_g.png", shallow=False)


def test_resume_reuses_persisted_artifacts(tmp_path):
    cfg = small_config(tmp_path)
    run(cfg, REQUEST, sphere_grid())
    before = {n: (tmp_path / n).read_bytes() for n in artifacts(tmp_path) if n != "manifest.json"}
    for n in ("hologram.json", "recon.png", "report.json"):
        (tmp_path / n).unlink()
    result = run(cfg, REQUEST, start="encode")
    assert set(result.manifest["timings_s"]) == {"encode", "enhance", "reconstruct"}
    for n, data in before.items():
        assert (tmp_path / n).read_bytes() == data, n


def test_resume_without_upstream_artifacts_fails(tmp_path):
    with pytest.raises(StageError) as info:
        run(small_config(tmp_path), REQUEST, start="synthesize")
    assert info.value.stage == "synthesize"


def test_render_stage_needs_a_field(tmp_path):
    cfg = small_config(tmp_path).with_overrides(radiance={"fit": False})
    with pytest.raises(ConfigError):
        run(cfg, REQUEST, start="render")


def test_checkpoint_is_loaded_instead_of_fitting(tmp_path):
    grid = sphere_grid()
    save_checkpoint(tmp_path / "g.hfrg", grid)
    cfg = small_config(tmp_path / "run").with_overrides(radiance={"checkpoint": str(tmp_path / "g.hfrg"),
                                                                  "fit": False})
    result = run(cfg, REQUEST)
    assert "fit" in result.manifest["timings_s"]
    assert not (tmp_path / "run" / "radiance.hfrg").exists()


def test_empty_scene_gives_black_outputs(tmp_path):
    grid = RadianceGrid((8, 8, 8))
    grid.params[..., 0] = EMPTY_DENSITY
    cfg = small_config(tmp_path)
    with pytest.warns(EmptyForegroundWarning):
        result = run(cfg, REQUEST, grid)
    assert np.all(io.load_image_pfm(tmp_path / "view.pfm").data == 0)
    assert np.all(io.load_image_pfm(tmp_path / "depth.pfm").data == cfg.radiance.far)
    complex_set = io.load_hologram_set(tmp_path / "hologram_complex.json")
    assert all(np.all(c.data == 0) for c in complex_set.channels)
    assert np.all(result.report.composite.data == 0)
    assert json.loads((tmp_path / "report.json").read_text())["focus"]["psnr_db"] == "inf"


def test_oversized_view_rejected(tmp_path):
    cfg = small_config(tmp_path).with_overrides(run={"max_width": 32, "output_dir": str(tmp_path)})
    with pytest.raises(ConfigError):
        run(cfg, REQUEST, sphere_grid())


def test_unknown_start_stage(tmp_path):
    with pytest.raises(ConfigError):
        run(small_config(tmp_path), REQUEST, start="paint")


def test_clahe_can_be_disabled(tmp_path):
    cfg = dataclasses.replace(small_config(tmp_path), clahe=dataclasses.replace(PipelineConfig().clahe,
                                                                                enabled=False))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        result = run(cfg, REQUEST, sphere_grid())
    assert result.enhanced_report is None
    assert not (tmp_path / "hologram_enhanced.json").exists()
