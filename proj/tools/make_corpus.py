#!/usr/bin/env python3
"""Regenerate the test corpus under tests/data/ from scikit-image / scikit-learn sample photos.

Grayscale crops go to tests/data/corpus/*.pgm, color crops to tests/data/color/*.ppm.
"""
import pathlib
import sys

import numpy as np
from skimage import color, data, io
from sklearn.datasets import load_sample_image

SIZE = 256

GRAY_SOURCES = [
    "astronaut", "camera", "chelsea", "coffee", "coins", "grass", "gravel", "moon",
    "motorcycle", "rocket", "retina", "hubble_deep_field",
    "brick", "clock", "cell", "immunohistochemistry",
]
COLOR_SOURCES = ["astronaut", "coffee", "chelsea", "rocket", "china", "flower"]


def load(name):
    if name in ("china", "flower"):
        return load_sample_image(name + ".jpg")
    if name == "motorcycle":
        return data.stereo_motorcycle()[0]
    return getattr(data, name)()


def to_gray8(img):
    if img.ndim == 3:
        img = color.rgb2gray(img[..., :3])
        return np.clip(np.round(img * 255), 0, 255).astype(np.uint8)
    if img.dtype != np.uint8:
        img = np.clip(np.round(img / img.max() * 255), 0, 255).astype(np.uint8)
    return img


def crops(img):
    h, w = img.shape[:2]
    out = []
    if h >= SIZE and w >= SIZE:
        y, x = (h - SIZE) // 2, (w - SIZE) // 2
        out.append(img[y:y + SIZE, x:x + SIZE])
    if h >= 2 * SIZE and w >= 2 * SIZE:
        out.append(img[:SIZE, :SIZE])
    return out


def write_pnm(path, img):
    magic = b"P5" if img.ndim == 2 else b"P6"
    h, w = img.shape[:2]
    with open(path, "wb") as f:
        f.write(magic + b"\n%d %d\n255\n" % (w, h))
        f.write(np.ascontiguousarray(img).tobytes())


def main():
    root = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else pathlib.Path(__file__).parent.parent / "tests" / "data")
    (root / "corpus").mkdir(parents=True, exist_ok=True)
    (root / "color").mkdir(parents=True, exist_ok=True)
    n = 0
    for name in GRAY_SOURCES + ["china", "flower"]:
        for i, c in enumerate(crops(to_gray8(load(name)))):
            if c.mean() < 10:  # mostly-black border crops
                continue
            write_pnm(root / "corpus" / f"{name}_{i}.pgm", c)
            n += 1
    for name in COLOR_SOURCES:
        c = crops(load(name)[..., :3].astype(np.uint8))[0]
        write_pnm(root / "color" / f"{name}.ppm", c)
    print(f"wrote {n} grayscale and {len(COLOR_SOURCES)} color images")


if __name__ == "__main__":
    main()
