"""One test per acceptance criterion. Each prints a PASS/FAIL line with the measured values."""

import math
import time

import numpy as np
import pytest
from conftest import random_field, rms, smooth_field
from oracles import global_histogram_equalization, rayleigh_sommerfeld_impulse
from test_radiance import _check_gradients, random_grid, random_rays

from nerfholo.cgh import double_phase_encode
from nerfholo.clahe import clahe_plane
from nerfholo.field import ComplexField, fft2
from nerfholo.pipeline import PipelineConfig, ViewRequest, run
from nerfholo.propagation import PropagationParams, propagate
from nerfholo.radiance import (FitOptions, RadianceGrid, RenderOptions, fit, render_ray, render_rays,
                               render_view_and_depth)
from nerfholo.reconstruct import decode_double_phase, psnr
from nerfholo.scenes import generate_synthetic_scene, held_out_pose, render_scene

PITCH = 8e-6
LAM = 532e-9
N_VIEWS = 24


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return emit


@pytest.fixture(scope="module")
def fitted():
    """The two-sphere fit used by criteria 4 and 7 (runs once)."""
    data = generate_synthetic_scene("spheres", N_VIEWS, 128, seed=0)
    ropts = RenderOptions(near=1.0, far=4.0, n_samples=128)
    grid = RadianceGrid((64, 64, 64))
    t0 = time.perf_counter()
    fit(grid, data, FitOptions(render=ropts, seed=0, log_every=0))
    return grid, ropts, time.perf_counter() - t0


def test_1_propagation_matches_rayleigh_sommerfeld(report):
    n, z = 64, 2e-3
    t0 = time.perf_counter()
    asm = propagate(ComplexField.impulse(n, n, PITCH, at=(n // 2, n // 2)), PropagationParams(LAM, z, PITCH)).data
    ref = rayleigh_sommerfeld_impulse(n // 2, PITCH, LAM, z)
    seconds = time.perf_counter() - t0
    q = slice(n // 2 - n // 4, n // 2 + n // 4)
    err = rms(asm[q, q], ref) / rms(ref, 0)
    ok = err <= 0.02 and seconds < 10
    report(1, ok, f"relative RMS {err:.4%} (<= 2%), {seconds:.2f} s (< 10 s)")
    assert ok


def test_2_propagation_invariants(report):
    rng = np.random.default_rng(2)
    worst = {"parseval": 0.0, "round_trip": 0.0, "semigroup": 0.0, "zero": 0.0}
    for _ in range(3):
        u = ComplexField(random_field(rng, 256, 256), PITCH)
        z1, z2 = rng.uniform(0.1e-3, 5e-3, size=2) * rng.choice([-1, 1], size=2)
        p = PropagationParams(LAM, z1, PITCH)
        out = propagate(u, p, pad=False)
        worst["parseval"] = max(worst["parseval"], abs(fft2(u).energy() / u.energy() - 1),
                                abs(out.energy() / u.energy() - 1))
        back = propagate(out, p.with_distance(-z1), pad=False)
        worst["round_trip"] = max(worst["round_trip"], rms(back.data, u.data))
        two = propagate(out, p.with_distance(z2), pad=False)
        one = propagate(u, p.with_distance(z1 + z2), pad=False)
        worst["semigroup"] = max(worst["semigroup"], rms(two.data, one.data))
        for pad in (False, True):
            same = propagate(u, p.with_distance(0.0), pad=pad)
            worst["zero"] = max(worst["zero"], rms(same.data, u.data))
    ok = (worst["parseval"] <= 1e-10 and worst["round_trip"] <= 1e-8 and worst["semigroup"] <= 1e-8
          and worst["zero"] <= 1e-12)
    report(2, ok, "  ".join(f"{k} {v:.2e}" for k, v in worst.items()))
    assert ok


def test_3_volume_rendering(report):
    sigma = 0.7
    g = RadianceGrid.filled((3, 3, 3), density=sigma)
    _, trans, _ = render_ray(g, (-2, 0, 0), (1, 0, 0), 0.0, 5.12, 512)
    beer = abs((1 - trans) - (1 - math.exp(-2 * sigma)))

    rng = np.random.default_rng(3)
    o, d = random_rays(rng, 10_000)
    b = render_rays(random_grid(2, (8, 8, 8)), o, d, RenderOptions(1.0, 5.0, 64), rng, reference=True)
    weights = float(np.max(np.abs(b.weights.sum(axis=1) + b.transmittance - 1)))

    grad_err, picked = _check_gradients(random_grid(6, (5, 5, 5)), reference=False)
    ok = beer <= 1e-3 and weights <= 1e-6 and grad_err < 1e-3 and len(picked) >= 20
    report(3, ok, f"Beer-Lambert {beer:.1e}  weights {weights:.1e}  "
                  f"gradient rel err {grad_err:.1e} on {len(picked)} parameters")
    assert ok


@pytest.mark.slow
def test_4_radiance_fit(report, fitted):
    grid, ropts, seconds = fitted
    pose = held_out_pose(N_VIEWS, 128)
    truth, truth_depth = render_scene("spheres", pose, ropts.far)
    view, depth = render_view_and_depth(grid, pose, ropts)
    fg = truth_depth.data[..., 0] < ropts.far
    mae = float(np.mean(np.abs(depth.data[..., 0][fg] - truth_depth.data[..., 0][fg]))) / ropts.spacing
    score = psnr(view, truth)
    ok = score >= 25 and mae <= 2 and seconds <= 600
    report(4, ok, f"held-out PSNR {score:.2f} dB (>= 25)  depth MAE {mae:.2f} spacings (<= 2)  "
                  f"fit {seconds:.0f} s (<= 600)")
    assert ok


def test_5_double_phase(report):
    a = np.linspace(0, 1, 1001)[:, None]
    phi = np.linspace(-np.pi, np.pi, 181)[None, :]
    target = a * np.exp(1j * phi)
    # each target value sits in a horizontal pair next to a peak-1 row
    data = np.zeros((2 * a.size, 2 * phi.size), complex)
    data[0::2, 0::2] = target
    data[0::2, 1::2] = target
    data[1::2] = 1.0
    phase, scale = double_phase_encode(ComplexField(data, PITCH))
    pair = 0.5 * (np.exp(1j * phase[0::2, 0::2]) + np.exp(1j * phase[0::2, 1::2])) * scale
    identity = float(np.max(np.abs(pair - target)))

    decoded = []
    for seed in (0, 1, 2):
        h = smooth_field(seed, 256)
        ph, s = double_phase_encode(ComplexField(h, PITCH))
        decoded.append(psnr(np.abs(decode_double_phase(ph, PITCH, 0.5).data * s), np.abs(h)))
    ok = identity <= 1e-14 and min(decoded) >= 35
    report(5, ok, f"pairwise decode max error {identity:.1e}  "
                  f"4f decode PSNR min {min(decoded):.2f} dB (>= 35)")
    assert ok


def test_6_clahe(report):
    rng = np.random.default_rng(6)
    worst = 0.0
    for shape in ((64, 64), (37, 91), (128, 40)):
        img = rng.beta(2, 5, size=shape)
        worst = max(worst, float(np.max(np.abs(clahe_plane(img, (1, 1), math.inf, 256)
                                                - global_histogram_equalization(img, 256)))))
    fixed = all(np.array_equal(clahe_plane(np.full((32, 32), v), (4, 4), 2.0, 256), np.full((32, 32), v))
                for v in (0.0, 0.3, 1.0))
    bounded = True
    for tiles, clip in (((1, 1), math.inf), ((4, 4), 2.0), ((8, 3), 1.0)):
        out = clahe_plane(rng.uniform(size=(64, 64)), tiles, clip, 256)
        bounded &= bool(out.min() >= 0 and out.max() <= 1)
    ok = worst <= 1 / 255 and fixed and bounded
    report(6, ok, f"oracle max diff {worst * 255:.3f} gray levels (<= 1)  fixed points {fixed}  bounded {bounded}")
    assert ok


@pytest.mark.slow
def test_7_end_to_end(report, fitted, tmp_path):
    grid, ropts, _ = fitted
    cfg = PipelineConfig().with_overrides(run={"output_dir": str(tmp_path)}, hologram={"n_layers": 4})
    pose = held_out_pose(N_VIEWS, 256)
    defocus = 5 * cfg.hologram.base_distance
    t0 = time.perf_counter()
    result = run(cfg, ViewRequest(pose, (defocus,)), grid)
    seconds = time.perf_counter() - t0
    sharp, blurred = result.report, result.focal_reports[0]
    enhanced = result.enhanced_report
    ok = (sharp.psnr >= 20 and blurred.psnr < sharp.psnr and enhanced.std >= sharp.std and seconds <= 120)
    report(7, ok, f"PSNR at 0.6 mm {sharp.psnr:.2f} dB (>= 20)  at {defocus * 1e3:.1f} mm {blurred.psnr:.2f} dB  "
                  f"std enhanced {enhanced.std:.4f} vs {sharp.std:.4f}  runtime {seconds:.1f} s (<= 120)")
    assert ok


def test_8_determinism(report, tmp_path):
    cfg = PipelineConfig().with_overrides(
        run={"output_dir": str(tmp_path)}, scene={"n_views": 4, "resolution": 32},
        radiance={"grid": 16, "iterations": 20, "rays_per_batch": 512, "n_samples": 32},
        hologram={"n_layers": 4, "phase": "random"})
    request = ViewRequest.orbit(0.9, 0.2, 64, 64, focuses=(2e-3,))

    def snapshot():
        return {p.name: p.read_bytes() for p in sorted(tmp_path.iterdir())
                if p.is_file() and p.name != "manifest.json"}

    run(cfg, request)
    first = snapshot()
    for p in tmp_path.iterdir():
        p.unlink()
    run(cfg, request)
    second = snapshot()
    differing = sorted(n for n in first.keys() | second.keys() if first.get(n) != second.get(n))
    ok = not differing and "radiance.hfrg" in first
    report(8, ok, f"{len(first)} artifacts compared (fit included), differing: {differing or 'none'}")
    assert ok
