#!/usr/bin/env python3
"""Writes the synthetic brain-slice rasters used by the raster-brain presets.

Grid: 64 x 48 pixels at 0.05 cm, origin (0, 0), so the slice spans 3.2 x 2.4 cm.
"""
import argparse
from pathlib import Path

import numpy as np

W, H, DX = 64, 48, 0.05


def write_pgm(path, img):
    g = np.clip(np.rint(img * 255), 0, 255).astype(int)
    with open(path, "w") as f:
        f.write(f"P2\n# synthetic, {DX} cm pixels\n{W} {H}\n255\n")
        for row in g[::-1]:  # top row first
            f.write(" ".join(map(str, row)) + "\n")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "presets" / "data"))
    out = Path(ap.parse_args().out)
    out.mkdir(parents=True, exist_ok=True)

    x = (np.arange(W) + 0.5) * DX
    y = (np.arange(H) + 0.5) * DX
    X, Y = np.meshgrid(x, y)  # row j = y index, bottom row first
    cx, cy = 1.6, 1.2

    brain = ((X - cx) / 1.5) ** 2 + ((Y - cy) / 1.1) ** 2 <= 1.0
    white = ((X - cx) / 0.95) ** 2 + ((Y - cy) / 0.6) ** 2 <= 1.0

    # uptake: background 0.5, a strong plaque focus and a weaker one
    pet = 0.5 + 0.28 * np.exp(-((X - 2.3) ** 2 + (Y - 1.7) ** 2) / (2 * 0.18 ** 2))
    pet += 0.18 * np.exp(-((X - 1.0) ** 2 + (Y - 0.6) ** 2) / (2 * 0.15 ** 2))
    pet = np.where(brain, pet, 0.0)

    # fibres run circumferentially around the slice centre
    r = np.hypot(X - cx, Y - cy) + 1e-12
    tx, ty = -(Y - cy) / r, (X - cx) / r
    write_pgm(out / "brain_mask.pgm", brain.astype(float))
    write_pgm(out / "white_matter.pgm", white.astype(float))
    write_pgm(out / "pet.pgm", pet)
    write_pgm(out / "direction_cos.pgm", (tx + 1) / 2)
    write_pgm(out / "direction_sin.pgm", (ty + 1) / 2)


if __name__ == "__main__":
    main()
