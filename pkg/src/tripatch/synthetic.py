"""Piecewise-planar test scenes with known planes, normals and a matching image."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ingest import DepthMap, Image2D, Intrinsics, NormalMap
from .patchcloud import plane_normals


@dataclass
class Scene:
    image: Image2D
    depth: DepthMap
    normals: NormalMap
    labels: np.ndarray
    planes: np.ndarray
    K: Intrinsics


def inside_polygon(x, y, poly) -> np.ndarray:
    """Even-odd point-in-polygon test, vectorized over the query points."""
    poly = np.asarray(poly, dtype=float)
    inside = np.zeros(np.broadcast(x, y).shape, dtype=bool)
    for (x0, y0), (x1, y1) in zip(poly, np.roll(poly, -1, axis=0)):
        crosses = (y0 > y) != (y1 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (x < xc)
    return inside


def planar_scene(width: int, height: int, K: Intrinsics, polygons, planes, intensities=None) -> Scene:
    """Label 0 is the background; polygon ``k`` paints label ``k + 1`` over earlier ones.

    ``planes`` holds one inverse-depth plane ``(a, b, c)`` per label, with
    ``1 / depth = a*u + b*v + c`` in normalized image coordinates.
    """
    planes = np.asarray(planes, dtype=float)
    if len(planes) != len(polygons) + 1:
        raise ValueError("need one plane per polygon plus one for the background")
    x = np.arange(width) + 0.5
    y = (np.arange(height) + 0.5)[:, None]
    xs, ys = np.broadcast_arrays(x[None, :], y)
    labels = np.zeros((height, width), dtype=np.int64)
    for k, poly in enumerate(polygons):
        labels[inside_polygon(xs, ys, poly)] = k + 1
    u, v = K.pixel_grid(width, height)
    p = planes[labels]
    s = p[..., 0] * u + p[..., 1] * v + p[..., 2]
    if np.any(s <= 0):
        raise ValueError("a plane has non-positive inverse depth inside the image")
    if intensities is None:
        intensities = np.linspace(0.1, 0.9, len(planes))
    img = np.asarray(intensities, dtype=float)[labels]
    normals = plane_normals(planes)[labels]
    return Scene(Image2D(img), DepthMap(1.0 / s), NormalMap(normals), labels, planes, K)


def demo_scenes(size: int = 64) -> dict[str, Scene]:
    """Three small scenes whose depth discontinuities are visible image edges."""
    K = Intrinsics.centered(size, size, float(size))
    S = float(size)
    return {
        "box": planar_scene(
            size, size, K,
            [[(0.25 * S, 0.25 * S), (0.7 * S, 0.25 * S), (0.7 * S, 0.75 * S), (0.25 * S, 0.75 * S)]],
            [(0.05, -0.1, 0.3), (0.2, 0.1, 0.8)],
        ),
        "wedge": planar_scene(
            size, size, K,
            [[(0.0, 0.6 * S), (S, 0.35 * S), (S, S), (0.0, S)], [(0.45 * S, 0.1 * S), (0.85 * S, 0.45 * S), (0.2 * S, 0.5 * S)]],
            [(0.0, 0.05, 0.25), (-0.05, -0.3, 0.45), (0.15, 0.05, 0.9)],
            intensities=[0.2, 0.55, 0.9],
        ),
        "stairs": planar_scene(
            size, size, K,
            [[(0.3 * S, 0.0), (S, 0.0), (S, S), (0.3 * S, S)], [(0.65 * S, 0.0), (S, 0.0), (S, S), (0.65 * S, S)]],
            [(0.0, 0.0, 0.6), (0.1, 0.0, 0.45), (0.0, 0.1, 0.3)],
            intensities=[0.0, 0.5, 1.0],
        ),
    }
