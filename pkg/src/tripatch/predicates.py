"""Filtered exact geometric predicates.

Each predicate evaluates in floating point first and falls back to exact
rational arithmetic when the result is within the rounding error bound.
Inputs are Python floats, which ``Fraction`` represents exactly.
"""

from __future__ import annotations

from fractions import Fraction

_EPS = 2.0**-53
_ORIENT_BOUND = (3.0 + 16.0 * _EPS) * _EPS
_INCIRCLE_BOUND = (10.0 + 96.0 * _EPS) * _EPS


def _sign(x) -> int:
    return (x > 0) - (x < 0)


def _small_ints(*xs) -> bool:
    # Integers below 2**10 keep every intermediate product exact in doubles.
    return all(x == int(x) and -1024.0 < x < 1024.0 for x in xs)


def orient2d(ax, ay, bx, by, cx, cy) -> int:
    """+1 if a, b, c have positive signed area, -1 if negative, 0 if collinear."""
    detl = (ax - cx) * (by - cy)
    detr = (ay - cy) * (bx - cx)
    det = detl - detr
    bound = _ORIENT_BOUND * (abs(detl) + abs(detr))
    if det > bound or -det > bound:
        return 1 if det > 0 else -1
    if _small_ints(ax, ay, bx, by, cx, cy):
        return _sign(det)
    ax, ay, bx, by, cx, cy = map(Fraction, (ax, ay, bx, by, cx, cy))
    return _sign((ax - cx) * (by - cy) - (ay - cy) * (bx - cx))


def incircle(ax, ay, bx, by, cx, cy, dx, dy) -> int:
    """+1 if d lies inside the circle through CCW-ordered a, b, c; 0 if on it."""
    adx, ady = ax - dx, ay - dy
    bdx, bdy = bx - dx, by - dy
    cdx, cdy = cx - dx, cy - dy
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    bc = bdx * cdy - bdy * cdx
    ca = cdx * ady - cdy * adx
    ab = adx * bdy - ady * bdx
    det = alift * bc + blift * ca + clift * ab
    permanent = (
        (abs(bdx * cdy) + abs(bdy * cdx)) * alift
        + (abs(cdx * ady) + abs(cdy * adx)) * blift
        + (abs(adx * bdy) + abs(ady * bdx)) * clift
    )
    bound = _INCIRCLE_BOUND * permanent
    if det > bound or -det > bound:
        return 1 if det > 0 else -1
    if _small_ints(ax, ay, bx, by, cx, cy, dx, dy):
        return _sign(det)
    ax, ay, bx, by, cx, cy, dx, dy = map(Fraction, (ax, ay, bx, by, cx, cy, dx, dy))
    adx, ady = ax - dx, ay - dy
    bdx, bdy = bx - dx, by - dy
    cdx, cdy = cx - dx, cy - dy
    det = (
        (adx * adx + ady * ady) * (bdx * cdy - bdy * cdx)
        + (bdx * bdx + bdy * bdy) * (cdx * ady - cdy * adx)
        + (cdx * cdx + cdy * cdy) * (adx * bdy - ady * bdx)
    )
    return _sign(det)


def segments_cross(a, b, c, d) -> bool:
    """True if open segments ab and cd cross at a single interior point."""
    o1 = orient2d(a[0], a[1], b[0], b[1], c[0], c[1])
    o2 = orient2d(a[0], a[1], b[0], b[1], d[0], d[1])
    if o1 == 0 or o2 == 0 or o1 == o2:
        return False
    o3 = orient2d(c[0], c[1], d[0], d[1], a[0], a[1])
    o4 = orient2d(c[0], c[1], d[0], d[1], b[0], b[1])
    return o3 != 0 and o4 != 0 and o3 != o4


def on_segment_interior(p, a, b) -> bool:
    """True if p lies exactly on segment ab, strictly between its endpoints."""
    if orient2d(a[0], a[1], b[0], b[1], p[0], p[1]) != 0:
        return False
    if (p[0], p[1]) == (a[0], a[1]) or (p[0], p[1]) == (b[0], b[1]):
        return False
    return min(a[0], b[0]) <= p[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= p[1] <= max(a[1], b[1])
