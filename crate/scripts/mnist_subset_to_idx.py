#!/usr/bin/env python3
"""Convert the 10k-digit MNIST subset shipped in the npm `mnist` package to IDX.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 scripts/mnist_subset_to_idx.py package/src/digits data/mnist-subset

Pixels in the package are stored as byte/255 rounded to three decimals, so the
original bytes are recovered exactly with round(x * 255). Digits are written
round-robin by class so that any prefix of the file is roughly class balanced.
"""
import gzip
import json
import struct
import sys
from pathlib import Path


def main(src: Path, dst: Path) -> None:
    per_class = []
    for digit in range(10):
        raw = json.loads((src / f"{digit}.json").read_text())["data"]
        assert len(raw) % 784 == 0
        images = [raw[i : i + 784] for i in range(0, len(raw), 784)]
        per_class.append(images)

    order = []
    longest = max(len(c) for c in per_class)
    for i in range(longest):
        for digit, images in enumerate(per_class):
            if i < len(images):
                order.append((digit, images[i]))

    n = len(order)
    pixels = bytearray()
    for _, img in order:
        pixels.extend(min(255, max(0, round(v * 255))) for v in img)
    labels = bytes(d for d, _ in order)

    dst.mkdir(parents=True, exist_ok=True)
    with gzip.GzipFile(dst / "images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, n, 28, 28))
        f.write(pixels)
    with gzip.GzipFile(dst / "labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, n))
        f.write(labels)
    print(f"wrote {n} images to {dst}")


if __name__ == "__main__":
    main(Path(sys.argv[1]), Path(sys.argv[2]))
