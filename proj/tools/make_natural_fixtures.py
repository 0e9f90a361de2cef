#!/usr/bin/env python3
"""Cut 224x224 RGB test crops from the photographs bundled with
scikit-image, scikit-learn and matplotlib.

Each source photo is rescaled so its short side lands in [224, 448] and a
random window is cropped; the seed pins the output. Used to regenerate
tests/data/natural/.
"""

import argparse
import os

import numpy as np
from PIL import Image
import matplotlib
import skimage
import sklearn

SIDE = 224


def sources():
    sk = os.path.join(os.path.dirname(skimage.__file__), "data")
    sl = os.path.join(os.path.dirname(sklearn.__file__), "datasets", "images")
    mpl = os.path.join(os.path.dirname(matplotlib.__file__), "mpl-data", "sample_data")
    return [
        os.path.join(sk, "astronaut.png"),
        os.path.join(sk, "chelsea.png"),
        os.path.join(sk, "coffee.png"),
        os.path.join(sk, "motorcycle_left.png"),
        os.path.join(sk, "rocket.jpg"),
        os.path.join(sl, "china.jpg"),
        os.path.join(sl, "flower.jpg"),
        os.path.join(mpl, "grace_hopper.jpg"),
    ]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="tests/data/natural")
    ap.add_argument("--count", type=int, default=50)
    ap.add_argument("--seed", type=int, default=2023)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    photos = [Image.open(p).convert("RGB") for p in sources()]
    os.makedirs(args.out, exist_ok=True)
    for i in range(args.count):
        photo = photos[i % len(photos)]
        w, h = photo.size
        short = rng.uniform(SIDE, 2 * SIDE)
        scale = short / min(w, h)
        resized = photo.resize((max(SIDE, round(w * scale)), max(SIDE, round(h * scale))),
                               Image.LANCZOS)
        x = int(rng.integers(0, resized.size[0] - SIDE + 1))
        y = int(rng.integers(0, resized.size[1] - SIDE + 1))
        crop = resized.crop((x, y, x + SIDE, y + SIDE))
        crop.save(os.path.join(args.out, f"photo_{i:02d}.png"), optimize=True)


if __name__ == "__main__":
    main()
