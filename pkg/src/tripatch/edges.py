"""Canny edges, chain tracing and polyline simplification.

Traced chains report each edge pixel ``(col, row)`` by its top-left corner
``(col, row)`` rather than its center. Non-maximum suppression resolves a tie
between two pixels in favor of the one with the larger index, so for an ideal
intensity step the reported corner sits exactly on the inter-pixel boundary
and no pixel center lands on the resulting mesh edge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InputError
from .ingest import Image2D


@dataclass(frozen=True)
class EdgeMap:
    data: np.ndarray  # (H, W) bool

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class Polyline:
    points: np.ndarray  # (N, 2) float, x then y
    closed: bool = False

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)


def gradient(gray: np.ndarray, sigma: float):
    """Smoothed Sobel gradients, scaled so an unblurred unit step has magnitude 1."""
    smooth = ndimage.gaussian_filter(np.asarray(gray, dtype=float), sigma, mode="nearest")
    gx = ndimage.sobel(smooth, axis=1, mode="nearest") / 4.0
    gy = ndimage.sobel(smooth, axis=0, mode="nearest") / 4.0
    return gx, gy, np.hypot(gx, gy)


def _shifted(a: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """``out[y, x] = a[y + dy, x + dx]``, zero outside the image."""
    h, w = a.shape
    out = np.zeros_like(a)
    ys = slice(max(0, -dy), min(h, h - dy))
    xs = slice(max(0, -dx), min(w, w - dx))
    yt = slice(max(0, dy), min(h, h + dy))
    xt = slice(max(0, dx), min(w, w + dx))
    out[ys, xs] = a[yt, xt]
    return out


# (forward offset, direction bin); the forward neighbor is the larger-index one.
_NMS_DIRS = [(1, 0), (1, 1), (0, 1), (-1, 1)]


def non_max_suppression(gx, gy, mag) -> np.ndarray:
    angle = np.degrees(np.arctan2(gy, gx)) % 180.0
    bins = np.floor((angle + 22.5) / 45.0).astype(int) % 4
    keep = np.zeros(mag.shape, dtype=bool)
    # magnitudes equal up to rounding count as ties, which the larger-index pixel wins
    tol = 1e-9 * float(mag.max(initial=0.0))
    for b, (dx, dy) in enumerate(_NMS_DIRS):
        fwd = _shifted(mag, dx, dy)
        bwd = _shifted(mag, -dx, -dy)
        keep |= (bins == b) & (mag > fwd + tol) & (mag >= bwd - tol)
    return keep & (mag > 0)


def canny(img: Image2D, sigma: float = 1.4, low: float = 0.1, high: float = 0.25) -> EdgeMap:
    """Canny edge map; thresholds apply to the normalized gradient magnitude."""
    if not low < high:
        raise InputError(f"canny thresholds must satisfy low < high, got low={low}, high={high}")
    if not sigma > 0:
        raise InputError(f"canny sigma must be positive, got {sigma}")
    gx, gy, mag = gradient(img.gray(), sigma)
    thin = non_max_suppression(gx, gy, mag)
    weak = thin & (mag >= low)
    strong = thin & (mag >= high)
    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=int))
    if n == 0:
        return EdgeMap(np.zeros(mag.shape, dtype=bool))
    seeded = np.zeros(n + 1, dtype=bool)
    seeded[np.unique(labels[strong])] = True
    seeded[0] = False
    return EdgeMap(seeded[labels])


# 8-neighborhood: 4-neighbors first, then diagonals.
_NEIGHBORS = [(1, 0), (0, 1), (-1, 0), (0, -1), (1, 1), (-1, 1), (-1, -1), (1, -1)]
# Cyclic ring order used to count branches.
_RING = [(1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1)]


def _branches(p, pixels) -> int:
    x, y = p
    ring = [(x + dx, y + dy) in pixels for dx, dy in _RING]
    rises = sum(1 for i in range(8) if ring[i] and not ring[i - 1])
    if rises == 0 and any(ring):
        return 1
    return rises


def trace_polylines(edges: EdgeMap) -> list[Polyline]:
    """Split the edge pixels into 8-connected chains.

    Junctions are pixels whose neighbors form three or more separate branches
    around them; chains end at junctions and the junction pixel is repeated as
    the endpoint of every chain that touches it. Isolated pixels are dropped.
    """
    ys, xs = np.nonzero(edges.data)
    pixels = set(zip(xs.tolist(), ys.tolist()))
    order = sorted(pixels, key=lambda p: (p[1], p[0]))
    junctions = {p for p in order if _branches(p, pixels) >= 3}
    visited: set = set()
    chains: list[tuple[list, bool]] = []

    def nbrs(p):
        x, y = p
        return [(x + dx, y + dy) for dx, dy in _NEIGHBORS if (x + dx, y + dy) in pixels]

    def walk(chain, start_junction):
        while True:
            cur = chain[-1]
            around = nbrs(cur)
            ends = [q for q in around if q in junctions and not (q == start_junction and len(chain) <= 2)]
            if ends:
                chain.append(ends[0])
                return chain
            nxt = [q for q in around if q not in junctions and q not in visited]
            if not nxt:
                if len(chain) == 1 and around:
                    # a spur whose only neighbors were taken by other chains hangs off one of them
                    chain.append(around[0])
                return chain
            visited.add(nxt[0])
            chain.append(nxt[0])

    linked = set()
    for j in sorted(junctions, key=lambda p: (p[1], p[0])):
        starts = []
        for q in nbrs(j):
            if q in junctions:
                key = (min(j, q), max(j, q))
                if key not in linked:
                    linked.add(key)
                    chains.append(([j, q], False))
            elif q not in visited:
                visited.add(q)
                starts.append(q)
        for q in starts:
            chain = walk([j, q], j)
            if len(chain) > 2 and chain[-1] == chain[0]:
                chains.append((chain[:-1], True))
            else:
                chains.append((chain, False))

    for p in order:
        if p in visited or p in junctions or _branches(p, pixels) > 1:
            continue
        visited.add(p)
        chains.append((walk([p], None), False))

    for p in order:
        if p in visited or p in junctions:
            continue
        visited.add(p)
        chain = walk([p], None)
        closed = len(chain) >= 3 and chain[-1] not in junctions and _adjacent(chain[-1], chain[0])
        chains.append((chain, closed))

    out = []
    for chain, closed in chains:
        if len(chain) < 2:
            continue
        out.append(Polyline(np.array(chain, dtype=float), closed=closed and len(chain) >= 3))
    return out


def _adjacent(p, q) -> bool:
    return p != q and abs(p[0] - q[0]) <= 1 and abs(p[1] - q[1]) <= 1


def point_segment_distance(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(pts)
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.linalg.norm(pts - a, axis=1)
    t = np.clip((pts - a) @ ab / denom, 0.0, 1.0)
    return np.linalg.norm(pts - (a + t[:, None] * ab), axis=1)


def _dedupe(pts: np.ndarray, closed: bool) -> np.ndarray:
    if len(pts) == 0:
        return pts
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.any(pts[1:] != pts[:-1], axis=1)
    pts = pts[keep]
    if closed and len(pts) > 1 and np.all(pts[0] == pts[-1]):
        pts = pts[:-1]
    return pts


def _douglas_peucker(pts: np.ndarray, eps: float) -> np.ndarray:
    n = len(pts)
    if n <= 2:
        return np.ones(n, dtype=bool)
    keep = np.zeros(n, dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, n - 1)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            continue
        d = point_segment_distance(pts[i + 1 : j], pts[i], pts[j])
        k = int(np.argmax(d))
        if d[k] > eps:
            k += i + 1
            keep[k] = True
            stack.append((i, k))
            stack.append((k, j))
    return keep


def simplify_polyline(p: Polyline, eps: float = 2.0) -> Polyline:
    """Douglas-Peucker simplification; endpoints kept, closed chains keep at least 3 points."""
    if eps < 0:
        raise InputError(f"simplification tolerance must be >= 0, got {eps}")
    pts = _dedupe(p.points, p.closed)
    if eps == 0 or len(pts) <= 2:
        return Polyline(pts.copy(), closed=p.closed and len(pts) >= 3)
    if not p.closed:
        return Polyline(pts[_douglas_peucker(pts, eps)], closed=False)

    far = int(np.argmax(np.linalg.norm(pts - pts[0], axis=1)))
    ring = np.vstack([pts, pts[:1]])
    keep = np.zeros(len(ring), dtype=bool)
    keep[: far + 1] |= _douglas_peucker(ring[: far + 1], eps)
    keep[far:] |= _douglas_peucker(ring[far:], eps)
    keep = keep[:-1]
    if keep.sum() < 3:
        d = point_segment_distance(pts, pts[0], pts[far])
        d[keep] = -1.0
        keep[int(np.argmax(d))] = True
    return Polyline(pts[keep], closed=True)
