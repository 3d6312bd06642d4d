"""Straightforward per-pixel reference for the depth metrics."""

from __future__ import annotations

import math


def brute_metrics(pred, gt):
    rows, cols = len(gt), len(gt[0])
    n = 0
    rel = sq = lg = 0.0
    lg_n = 0
    hits = [0, 0, 0]
    rel_terms, sq_terms, lg_terms = [], [], []
    for y in range(rows):
        for x in range(cols):
            p, g = float(pred[y][x]), float(gt[y][x])
            if not (math.isfinite(g) and g > 0 and math.isfinite(p) and p != 0):
                continue
            n += 1
            rel_terms.append(abs(p - g) / g)
            sq_terms.append((p - g) ** 2)
            if p > 0:
                lg_n += 1
                lg_terms.append(abs(math.log10(p) - math.log10(g)))
                r = max(p / g, g / p)
                for k in range(3):
                    if r < 1.25 ** (k + 1):
                        hits[k] += 1
    rel = math.fsum(rel_terms) / n
    sq = math.sqrt(math.fsum(sq_terms) / n)
    lg = math.fsum(lg_terms) / lg_n if lg_n else 0.0
    return {
        "rel": rel,
        "rms": sq,
        "log10": lg,
        "delta1": hits[0] / n,
        "delta2": hits[1] / n,
        "delta3": hits[2] / n,
        "n_valid": n,
    }
