"""Image to 2D mesh: edges, polylines, simplification and constrained triangulation."""

from __future__ import annotations

from dataclasses import dataclass

from .edges import canny, simplify_polyline, trace_polylines
from .errors import InputError
from .ingest import Image2D
from .triangulate import Mesh2D, build_constraints, triangulate_cdt


@dataclass(frozen=True)
class MeshConfig:
    canny_sigma: float = 1.4
    canny_low: float = 0.1
    canny_high: float = 0.25
    simplify_eps: float = 2.0
    snap_eps: float = 1.0

    def __post_init__(self):
        if not self.simplify_eps >= 0:
            raise InputError(f"simplify_eps must be >= 0, got {self.simplify_eps}")
        if not self.snap_eps >= 0:
            raise InputError(f"snap_eps must be >= 0, got {self.snap_eps}")


def extract_mesh(img: Image2D, cfg: MeshConfig = MeshConfig()) -> Mesh2D:
    """Edge-adaptive triangulation of the image rectangle."""
    edges = canny(img, cfg.canny_sigma, cfg.canny_low, cfg.canny_high)
    lines = [simplify_polyline(p, cfg.simplify_eps) for p in trace_polylines(edges)]
    vertices, segments = build_constraints(lines, img.width, img.height, cfg.snap_eps)
    return triangulate_cdt(vertices, segments, img.width, img.height)
