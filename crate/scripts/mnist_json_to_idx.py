#!/usr/bin/env python3
"""Convert the per-digit JSON dumps of the `mnist` npm package to gzipped IDX.

Usage: mnist_json_to_idx.py DIGITS_DIR OUT_DIR

DIGITS_DIR holds 0.json .. 9.json, each {"data": [...]} with 784 floats per
image (byte / 255 rounded to three decimals, which round-trips exactly).
Images are interleaved round-robin across digits.
"""
import gzip
import json
import os
import struct
import sys


def main():
    src, out = sys.argv[1], sys.argv[2]
    per_digit = []
    for d in range(10):
        with open(os.path.join(src, f"{d}.json")) as f:
            flat = json.load(f)["data"]
        assert len(flat) % 784 == 0
        per_digit.append([flat[i:i + 784] for i in range(0, len(flat), 784)])
    images, labels = [], []
    for k in range(max(len(p) for p in per_digit)):
        for d, imgs in enumerate(per_digit):
            if k < len(imgs):
                images.append(bytes(round(v * 255) for v in imgs[k]))
                labels.append(d)
    os.makedirs(out, exist_ok=True)
    with gzip.GzipFile(os.path.join(out, "images-idx3-ubyte.gz"), "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x803, len(images), 28, 28))
        f.write(b"".join(images))
    with gzip.GzipFile(os.path.join(out, "labels-idx1-ubyte.gz"), "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(bytes(labels))
    print(f"wrote {len(images)} images")


if __name__ == "__main__":
    main()
