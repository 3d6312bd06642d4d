from __future__ import annotations

from fractions import Fraction

from hypothesis import given
from hypothesis import strategies as st

from tripatch.predicates import incircle, on_segment_interior, orient2d, segments_cross

coord = st.one_of(st.integers(-50, 50).map(float), st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False))


def _sign(x):
    return (x > 0) - (x < 0)


@given(coord, coord, coord, coord, coord, coord)
def test_orient_matches_rational(ax, ay, bx, by, cx, cy):
    F = Fraction
    exact = (F(ax) - F(cx)) * (F(by) - F(cy)) - (F(ay) - F(cy)) * (F(bx) - F(cx))
    assert orient2d(ax, ay, bx, by, cx, cy) == _sign(exact)


@given(coord, coord, coord, coord, coord, coord, coord, coord)
def test_incircle_matches_rational(ax, ay, bx, by, cx, cy, dx, dy):
    F = Fraction
    rows = []
    for px, py in ((ax, ay), (bx, by), (cx, cy)):
        u, v = F(px) - F(dx), F(py) - F(dy)
        rows.append((u, v, u * u + v * v))
    (a0, a1, a2), (b0, b1, b2), (c0, c1, c2) = rows
    det = a0 * (b1 * c2 - b2 * c1) - a1 * (b0 * c2 - b2 * c0) + a2 * (b0 * c1 - b1 * c0)
    assert incircle(ax, ay, bx, by, cx, cy, dx, dy) == _sign(det)


def test_near_collinear_is_exact():
    # float evaluation of this determinant rounds to the wrong sign without the exact fallback
    a = (0.5, 0.5)
    b = (12.0, 12.0)
    c = (24.0, 24.0 + 2.0**-48)
    assert orient2d(*a, *b, *c) == 1
    assert orient2d(*a, *b, 24.0, 24.0) == 0


def test_cocircular_points():
    assert incircle(0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0) == 0
    assert incircle(0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.5, 0.5) == 1


def test_segment_helpers():
    assert segments_cross((0, 0), (2, 2), (0, 2), (2, 0))
    assert not segments_cross((0, 0), (2, 2), (1, 1), (3, 0))  # touching is not crossing
    assert on_segment_interior((1, 1), (0, 0), (2, 2))
    assert not on_segment_interior((0, 0), (0, 0), (2, 2))
    assert not on_segment_interior((3, 3), (0, 0), (2, 2))
