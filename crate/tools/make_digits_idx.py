#!/usr/bin/env python3
"""Build the bundled handwritten-digit instance pool.

Takes the 1797 8x8 handwritten digits that ship with scikit-learn,
upsamples each to 28x28 and emits several augmented variants (random
shift, small rotation, pixel noise) per source digit. The result is
written as gzipped IDX image/label files under data/, the same container
format the Rust loader consumes.

Deterministic: a fixed RNG seed produces byte-identical output.

Usage: python3 tools/make_digits_idx.py [--out data] [--copies 5]
"""

import argparse
import gzip
import struct
from pathlib import Path

import numpy as np
from scipy import ndimage
from sklearn.datasets import load_digits

SIDE = 28
SEED = 20240817


def render(img8: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One augmented 28x28 uint8 image from an 8x8 digit (values 0..16)."""
    # Upsample 8x8 -> 24x24 with smooth interpolation.
    big = ndimage.zoom(img8.astype(np.float64) / 16.0, 3.0, order=1)
    angle = rng.uniform(-12.0, 12.0)
    big = ndimage.rotate(big, angle, reshape=False, order=1, mode="constant")
    canvas = np.zeros((SIDE, SIDE), dtype=np.float64)
    # Random placement of the 24x24 glyph inside the 28x28 canvas.
    dy, dx = rng.integers(0, SIDE - big.shape[0] + 1, size=2)
    canvas[dy : dy + big.shape[0], dx : dx + big.shape[1]] = big
    canvas += rng.normal(0.0, 0.06, size=canvas.shape)
    canvas = np.clip(canvas, 0.0, 1.0)
    return (canvas * 255.0).round().astype(np.uint8)


def write_idx_images(path: Path, images: np.ndarray) -> None:
    count, rows, cols = images.shape
    header = struct.pack(">IIII", 0x0803, count, rows, cols)
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(header)
        f.write(images.tobytes())


def write_idx_labels(path: Path, labels: np.ndarray) -> None:
    header = struct.pack(">II", 0x0801, len(labels))
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(header)
        f.write(labels.astype(np.uint8).tobytes())


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data", help="output directory")
    ap.add_argument(
        "--copies", type=int, default=5, help="augmented variants per source digit"
    )
    args = ap.parse_args()

    digits = load_digits()
    rng = np.random.default_rng(SEED)

    images = []
    labels = []
    for img8, label in zip(digits.images, digits.target):
        for _ in range(args.copies):
            images.append(render(img8, rng))
            labels.append(label)
    images = np.stack(images)
    labels = np.asarray(labels, dtype=np.uint8)

    # Shuffle so class order is not systematic in the pool.
    order = rng.permutation(len(labels))
    images, labels = images[order], labels[order]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_idx_images(out / "digits-images-idx3-ubyte.gz", images)
    write_idx_labels(out / "digits-labels-idx1-ubyte.gz", labels)
    counts = np.bincount(labels, minlength=10)
    print(f"wrote {len(labels)} instances to {out}/ (per-class: {counts.tolist()})")


if __name__ == "__main__":
    main()
