#!/usr/bin/env python3
"""Convert the digit samples bundled with the `mnist` npm package into IDX files.

The npm package (MIT, Juan Cazala) ships 10,000 MNIST digits as JSON arrays of
pixel intensities rounded to three decimals. Multiplying by 255 and rounding
recovers the original bytes exactly. Samples are shuffled with a fixed seed so
that any prefix is a class-balanced-ish subset.

usage: mnist_from_npm_digits.py <package/src/digits> <out_dir>
"""
import gzip
import json
import random
import struct
import sys
from pathlib import Path


def main() -> None:
    src, out = Path(sys.argv[1]), Path(sys.argv[2])
    samples = []
    for digit in range(10):
        flat = json.loads((src / f"{digit}.json").read_text())["data"]
        assert len(flat) % 784 == 0
        for k in range(len(flat) // 784):
            pixels = bytes(round(v * 255) for v in flat[k * 784:(k + 1) * 784])
            samples.append((pixels, digit))
    random.Random(0).shuffle(samples)

    out.mkdir(parents=True, exist_ok=True)
    n = len(samples)
    with gzip.GzipFile(out / "digits-images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 2051, n, 28, 28))
        for pixels, _ in samples:
            f.write(pixels)
    with gzip.GzipFile(out / "digits-labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 2049, n))
        f.write(bytes(label for _, label in samples))


if __name__ == "__main__":
    main()
