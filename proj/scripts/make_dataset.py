#!/usr/bin/env python3
"""Build the desk-scale MNIST subset shipped under data/mnist/.

Source: the `mnist` npm package (https://www.npmjs.com/package/mnist),
which bundles 10,000 genuine MNIST digits as JSON with pixels rounded
to three decimals. That rounding is exactly invertible to the original
u8 pixels (error < 0.5/255), so the files written here contain true
MNIST pixel data.

Usage:
    npm pack mnist && tar xzf mnist-*.tgz
    python3 scripts/make_dataset.py package/src/digits data/mnist

The split is deterministic: within each class, every 5th sample goes to
the test set; classes are interleaved round-robin so contiguous slices
of the output stay class-balanced.
"""

import gzip
import json
import struct
import sys
from pathlib import Path


def load_digits(src: Path):
    per_class = []
    for d in range(10):
        with open(src / f"{d}.json") as f:
            flat = json.load(f)["data"]
        n = len(flat) // 784
        imgs = [bytes(round(v * 255) for v in flat[i * 784:(i + 1) * 784])
                for i in range(n)]
        per_class.append(imgs)
    return per_class


def interleave(per_class_items):
    out = []
    longest = max(len(items) for items in per_class_items)
    for i in range(longest):
        for d in range(10):
            if i < len(per_class_items[d]):
                out.append((per_class_items[d][i], d))
    return out


def write_idx(path: Path, magic: int, dims, payload: bytes):
    header = struct.pack(">ii", magic, dims[0])
    for d in dims[1:]:
        header += struct.pack(">i", d)
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(header + payload)


def main():
    src = Path(sys.argv[1] if len(sys.argv) > 1 else "package/src/digits")
    dst = Path(sys.argv[2] if len(sys.argv) > 2 else "data/mnist")
    dst.mkdir(parents=True, exist_ok=True)

    per_class = load_digits(src)
    train_cls, test_cls = [], []
    for imgs in per_class:
        train_cls.append([im for i, im in enumerate(imgs) if i % 5 != 4])
        test_cls.append([im for i, im in enumerate(imgs) if i % 5 == 4])

    train = interleave(train_cls)
    test = interleave(test_cls)

    for name, split in (("train", train), ("t10k", test)):
        images = b"".join(im for im, _ in split)
        labels = bytes(lbl for _, lbl in split)
        write_idx(dst / f"{name}-images-idx3-ubyte.gz", 0x803,
                  (len(split), 28, 28), images)
        write_idx(dst / f"{name}-labels-idx1-ubyte.gz", 0x801,
                  (len(split),), labels)
        print(f"{name}: {len(split)} samples")


if __name__ == "__main__":
    main()
