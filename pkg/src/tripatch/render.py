"""Rasterization of patch clouds and general triangle meshes, plus OBJ I/O.

Patch footprints are fixed 2D triangles, so rendering a patch cloud reduces
to evaluating each pixel owner's inverse-depth plane, and the rendered depth
is differentiable in closed form with respect to the plane parameters.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import InputError, InvariantError
from .ingest import DepthMap, Intrinsics, NormalMap
from .patchcloud import FaceIdMap, PatchCloud, face_id_map, plane_normals


def inverse_depth(cloud: PatchCloud, ids: FaceIdMap) -> np.ndarray:
    """Per-pixel ``s = a*u + b*v + c`` of the owning face; NaN where uncovered."""
    u, v = cloud.intrinsics.pixel_grid(cloud.width, cloud.height)
    f = ids.data
    covered = f >= 0
    p = cloud.params[np.where(covered, f, 0)] if cloud.n_faces else np.zeros(f.shape + (3,))
    s = p[..., 0] * u + p[..., 1] * v + p[..., 2]
    return np.where(covered, s, np.nan)


def rasterize_patches(cloud: PatchCloud, ids: FaceIdMap | None = None, threads: int = 1):
    """Render depth, normals and face ownership of a patch cloud.

    Returns ``(DepthMap, NormalMap, FaceIdMap)``. Every covered pixel takes
    the depth ``1 / s`` of its owner's plane at the pixel center and the owner's
    normal.
    """
    if ids is None:
        ids = face_id_map(cloud, threads=threads)
    s = inverse_depth(cloud, ids)
    covered = ids.data >= 0
    bad = covered & ~(s > 0)
    if np.any(bad):
        ys, xs = np.nonzero(bad)
        face = int(ids.data[ys[0], xs[0]])
        raise InvariantError(f"face {face} has non-positive inverse depth at pixel ({int(xs[0])}, {int(ys[0])})")
    depth = np.zeros(s.shape)
    depth[covered] = 1.0 / s[covered]
    normals = np.zeros(s.shape + (3,))
    if cloud.n_faces:
        face_n = plane_normals(cloud.params)
        normals[covered] = face_n[ids.data[covered]]
    return DepthMap(depth), NormalMap(normals), ids


def depth_param_gradient(cloud: PatchCloud, pixel, ids: FaceIdMap | None = None) -> np.ndarray:
    """``dD/d(a, b, c)`` of the owning face at integer pixel ``(x, y)``."""
    x, y = int(pixel[0]), int(pixel[1])
    if ids is None:
        ids = face_id_map(cloud)
    if not (0 <= x < cloud.width and 0 <= y < cloud.height) or ids.data[y, x] < 0:
        raise InputError(f"pixel ({x}, {y}) is not covered by the patch cloud")
    a, b, c = cloud.params[ids.data[y, x]]
    u, v = cloud.intrinsics.normalize(x + 0.5, y + 0.5)
    s = a * u + b * v + c
    if not s > 0:
        raise InvariantError(f"non-positive inverse depth at pixel ({x}, {y})")
    return -np.array([u, v, 1.0]) / (s * s)


def project(vertices3d: np.ndarray, K: Intrinsics) -> np.ndarray:
    P = np.asarray(vertices3d, dtype=float).reshape(-1, 3)
    return np.stack([K.fx * P[:, 0] / P[:, 2] + K.cx, K.fy * P[:, 1] / P[:, 2] + K.cy], axis=1)


def _raster_chunk(xy, invz, faces, W, H):
    zbuf = np.full((H, W), np.inf)
    for a, b, c in faces:
        p = xy[[a, b, c]]
        iz = invz[[a, b, c]]
        area2 = (p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1]) - (p[1, 1] - p[0, 1]) * (p[2, 0] - p[0, 0])
        if area2 == 0 or not np.isfinite(area2):
            continue
        if area2 < 0:
            p = p[[0, 2, 1]]
            iz = iz[[0, 2, 1]]
            area2 = -area2
        x0 = max(int(np.floor(p[:, 0].min() - 0.5)), 0)
        x1 = min(int(np.ceil(p[:, 0].max() - 0.5)), W - 1)
        y0 = max(int(np.floor(p[:, 1].min() - 0.5)), 0)
        y1 = min(int(np.ceil(p[:, 1].max() - 0.5)), H - 1)
        if x1 < x0 or y1 < y0:
            continue
        px = np.arange(x0, x1 + 1) + 0.5
        py = (np.arange(y0, y1 + 1) + 0.5)[:, None]
        inside = np.ones((y1 - y0 + 1, x1 - x0 + 1), dtype=bool)
        acc = np.zeros(inside.shape)
        for k in range(3):
            # edge opposite vertex k
            ax, ay = p[(k + 1) % 3]
            bx, by = p[(k + 2) % 3]
            dx, dy = bx - ax, by - ay
            e = dx * (py - ay) - dy * (px - ax)
            top_left = (dy == 0 and dx > 0) or dy < 0
            inside &= (e >= 0) if top_left else (e > 0)
            acc = acc + e * iz[k]
        s = acc / area2
        win = zbuf[y0 : y1 + 1, x0 : x1 + 1]
        depth = np.where(inside & (s > 0), 1.0 / np.where(s > 0, s, 1.0), np.inf)
        np.minimum(win, depth, out=win)
    return zbuf


def rasterize_mesh3d(vertices3d, faces, K: Intrinsics, W: int, H: int, threads: int = 1) -> DepthMap:
    """Z-buffered perspective rendering of a 3D triangle mesh to a depth map.

    Inverse depth is interpolated linearly in screen space (perspective
    correct); pixel centers on an edge belong to the triangle for which it is
    a top or left edge. Uncovered pixels are invalid (0).
    """
    V = np.asarray(vertices3d, dtype=float).reshape(-1, 3)
    F = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if len(F) == 0:
        return DepthMap(np.zeros((H, W)))
    if np.any(V[:, 2] <= 0):
        raise InputError("all mesh vertices must have positive depth")
    xy = project(V, K)
    invz = 1.0 / V[:, 2]
    threads = max(1, int(threads))
    if threads == 1 or len(F) < 64:
        zbuf = _raster_chunk(xy, invz, F.tolist(), W, H)
    else:
        bounds = np.linspace(0, len(F), threads + 1).astype(int)
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda k: _raster_chunk(xy, invz, F[bounds[k] : bounds[k + 1]].tolist(), W, H), range(threads)))
        zbuf = parts[0]
        for p in parts[1:]:
            np.minimum(zbuf, p, out=zbuf)
    zbuf[~np.isfinite(zbuf)] = 0.0
    return DepthMap(zbuf)


def patch_vertices(cloud: PatchCloud) -> tuple[np.ndarray, np.ndarray]:
    """Back-projected corners ``(3M, 3)`` and faces ``(M, 3)``; corners duplicated per patch."""
    cloud.check_positive()
    u, v = cloud.corner_uv()
    z = 1.0 / cloud.corner_inverse_depth()
    verts = np.stack([u * z, v * z, z], axis=-1).reshape(-1, 3)
    faces = np.arange(3 * cloud.n_faces, dtype=np.int64).reshape(-1, 3)
    return verts, faces


def write_obj(path, vertices3d, faces, header: str | None = None) -> None:
    lines = [f"# {header}"] if header else []
    lines += [f"v {x!r} {y!r} {z!r}" for x, y, z in np.asarray(vertices3d, dtype=float).tolist()]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in np.asarray(faces, dtype=np.int64).tolist()]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def export_obj(cloud: PatchCloud, path) -> None:
    """Wavefront OBJ with 3M vertices and M faces (patches stay independent)."""
    verts, faces = patch_vertices(cloud)
    write_obj(path, verts, faces, header=f"patch cloud {cloud.width}x{cloud.height}, {cloud.n_faces} patches")


def load_obj(path) -> tuple[np.ndarray, np.ndarray]:
    verts, faces = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(t) for t in parts[1:4]])
            elif parts[0] == "f":
                faces.append([int(t.split("/")[0]) - 1 for t in parts[1:4]])
    return np.array(verts, dtype=float).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3)
