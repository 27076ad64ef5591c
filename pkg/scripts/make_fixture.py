"""Regenerate the small committed hologram fixture and its golden reconstruction report.

    python scripts/make_fixture.py tests/fixtures

The fixture is the spheres scene seen from an orbit pose at 64x64, ray traced (no fitting),
sliced into 4 layers at the default optics and double-phase encoded with the default carrier.
"""

import argparse
import json
from pathlib import Path

from nerfholo import io
from nerfholo.cgh import RgbdFrame, SynthesisParams, encode_hologram_set, synthesize
from nerfholo.reconstruct import reconstruct_intensity
from nerfholo.scenes import orbit_pose, render_scene

FOCUS = 0.6e-3


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out", type=Path)
    ap.add_argument("--res", type=int, default=64)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    rgb, depth = render_scene("spheres", orbit_pose(0.4, 0.3, args.res), 4.0)
    io.save_image_pfm(args.out / "reference.pfm", rgb)
    frame = RgbdFrame(rgb, depth, 1.0, 4.0)
    hset = synthesize(frame, 4, SynthesisParams(phase="constant", fit_depth_range=True))
    encoded = encode_hologram_set(hset, (0.25, 0.25), quantize=True, phase_floor=0.05)
    sidecar = io.save_hologram_set(args.out, encoded, "hologram")

    # golden report from the reloaded files, exactly what `nerfholo recon` sees
    report = reconstruct_intensity(io.load_hologram_set(sidecar), FOCUS, io.load_image_pfm(args.out / "reference.pfm"))
    (args.out / "golden_report.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    print(f"wrote {sidecar}; psnr {report.psnr:.2f} dB")


if __name__ == "__main__":
    main()
