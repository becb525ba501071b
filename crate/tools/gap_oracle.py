"""Straight-line reference computation of the vendor-gap experiment.

Reads three PGM corpora (reference, group A, group B), builds an averaged
foreground CDF reference, harmonizes every group image by brute-force
nearest-CDF search, and prints the cross-group and to-reference CDF L1
distances before and after. Shares no code with the Rust implementation.

    python3 tools/gap_oracle.py REF_DIR A_DIR B_DIR
"""

import json
import sys
from pathlib import Path

import numpy as np


def read_pgm(path):
    data = path.read_bytes()
    fields = []
    pos = 2
    while len(fields) < 3:
        while data[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    w, h, maxval = fields
    raster = data[pos + 1 :]
    dtype = ">u2" if maxval > 255 else "u1"
    px = np.frombuffer(raster, dtype=dtype, count=w * h).astype(np.int64)
    return px, int(maxval).bit_length()


def fg_cdf(px, bits):
    counts = np.bincount(px, minlength=1 << bits).astype(np.float64)
    counts[0] = 0
    return np.cumsum(counts) / counts.sum()


def l1(a, b):
    return float(np.abs(a - b).sum() / (len(a) - 1))


def harmonize(px, bits, ref):
    src = fg_cdf(px, bits)
    q = np.arange(1, 1 << bits)
    table = np.zeros(1 << bits, dtype=np.int64)
    for p in range(1, 1 << bits):
        d = np.abs(src[p] - ref[1:])
        table[p] = q[np.argmin(d)]  # argmin returns the first minimum
    return np.where(px > 0, table[px], 0)


def corpus(d):
    return [read_pgm(p) for p in sorted(Path(d).glob("*.pgm"))]


def main():
    ref_imgs, a_imgs, b_imgs = (corpus(d) for d in sys.argv[1:4])
    bits = ref_imgs[0][1]
    ref = np.mean([fg_cdf(px, b) for px, b in ref_imgs], axis=0)

    def stats(group_a, group_b):
        ca = [fg_cdf(px, bits) for px in group_a]
        cb = [fg_cdf(px, bits) for px in group_b]
        cross = [l1(x, y) for x in ca for y in cb]
        return {
            "cross_mean": float(np.mean(cross)),
            "to_ref": [l1(c, ref) for c in ca + cb],
        }

    pre = stats([px for px, _ in a_imgs], [px for px, _ in b_imgs])
    post = stats([harmonize(px, bits, ref) for px, _ in a_imgs], [harmonize(px, bits, ref) for px, _ in b_imgs])
    slack = 1.0 / ((1 << bits) - 1)
    print(
        json.dumps(
            {
                "bits": bits,
                "pre_cross_mean": pre["cross_mean"],
                "post_cross_mean": post["cross_mean"],
                "ratio": post["cross_mean"] / pre["cross_mean"],
                "max_post_minus_pre_to_ref": max(b - a for a, b in zip(pre["to_ref"], post["to_ref"])),
                "slack": slack,
            },
            indent=2,
        )
    )


if __name__ == "__main__":
    main()
