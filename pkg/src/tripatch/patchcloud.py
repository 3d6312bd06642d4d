"""Triangular patch clouds: detached mesh faces carrying one inverse-depth plane each.

A patch keeps its 2D triangle fixed and is positioned in 3D by three numbers
``(a, b, c)``: over normalized camera coordinates ``(u, v)`` the inverse depth
is ``s(u, v) = a*u + b*v + c``. The 3D plane is ``a*X + b*Y + c*Z = 1``, so
``(a, b, c)`` is the (unnormalized) plane normal and depth along the pixel ray
through ``(u, v)`` is ``1 / s``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, InvariantError
from .ingest import Intrinsics
from .triangulate import Mesh2D


@dataclass(frozen=True)
class PatchCloud:
    width: int
    height: int
    intrinsics: Intrinsics
    tris: np.ndarray  # (M, 3, 2) pixel coordinates, read-only
    params: np.ndarray = field(default=None)  # (M, 3) inverse-depth plane coefficients

    def __post_init__(self):
        tris = np.array(self.tris, dtype=float).reshape(-1, 3, 2)
        tris.setflags(write=False)
        object.__setattr__(self, "tris", tris)
        params = np.zeros((len(tris), 3)) if self.params is None else np.array(self.params, dtype=float).reshape(-1, 3)
        if len(params) != len(tris):
            raise InputError(f"{len(tris)} triangles but {len(params)} parameter rows")
        object.__setattr__(self, "params", params)

    @property
    def n_faces(self) -> int:
        return len(self.tris)

    @property
    def n_params(self) -> int:
        return 3 * self.n_faces

    def with_params(self, params) -> "PatchCloud":
        return PatchCloud(self.width, self.height, self.intrinsics, self.tris, params)

    def corner_uv(self) -> tuple[np.ndarray, np.ndarray]:
        """Normalized coordinates of every corner, each ``(M, 3)``."""
        return self.intrinsics.normalize(self.tris[..., 0], self.tris[..., 1])

    def corner_inverse_depth(self, params=None) -> np.ndarray:
        p = self.params if params is None else params
        u, v = self.corner_uv()
        return p[:, 0:1] * u + p[:, 1:2] * v + p[:, 2:3]

    def centroids(self) -> np.ndarray:
        return self.tris.mean(axis=1)

    def check_positive(self) -> None:
        s = self.corner_inverse_depth()
        bad = np.nonzero(~np.all(s > 0, axis=1))[0]
        if len(bad):
            raise InvariantError(f"patch {int(bad[0])} has non-positive inverse depth at a corner")

    def to_dict(self) -> dict:
        return {
            "width": int(self.width),
            "height": int(self.height),
            "intrinsics": self.intrinsics.to_dict(),
            "faces": [{"tri": t, "abc": p} for t, p in zip(self.tris.tolist(), self.params.tolist())],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PatchCloud":
        try:
            K = d["intrinsics"]
            faces = d["faces"]
            tris = np.array([f["tri"] for f in faces], dtype=float).reshape(-1, 3, 2)
            params = np.array([f["abc"] for f in faces], dtype=float).reshape(-1, 3)
            return cls(int(d["width"]), int(d["height"]), Intrinsics(K["fx"], K["fy"], K["cx"], K["cy"]), tris, params)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InputError):
                raise
            raise InputError(f"malformed patch-cloud JSON: {exc}") from exc


@dataclass(frozen=True)
class FaceIdMap:
    data: np.ndarray  # (H, W) int64, -1 where no face

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def region_sizes(self, n_faces: int) -> np.ndarray:
        ids = self.data[self.data >= 0]
        return np.bincount(ids, minlength=n_faces)


@dataclass(frozen=True)
class FeatureMap:
    data: np.ndarray  # (H, W, C)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3:
            raise InputError(f"feature map must be (H, W, C), got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise InputError("feature map contains non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


def detach_faces(mesh: Mesh2D, K: Intrinsics, init_depth: float = 2.0) -> PatchCloud:
    """Treat every mesh face as an independent fronto-parallel patch at ``init_depth``."""
    if not init_depth > 0:
        raise InputError(f"init_depth must be positive, got {init_depth}")
    tris = mesh.vertices[mesh.faces] if mesh.n_faces else np.zeros((0, 3, 2))
    params = np.zeros((len(tris), 3))
    params[:, 2] = 1.0 / init_depth
    return PatchCloud(int(mesh.width), int(mesh.height), K, tris, params)


def plane_normals(params: np.ndarray) -> np.ndarray:
    """Unit normals ``-(a, b, c) / |(a, b, c)|`` for every row."""
    params = np.atleast_2d(params)
    norm = np.linalg.norm(params, axis=1)
    if np.any(norm == 0):
        raise InputError("plane parameters (0, 0, 0) have no normal")
    return -params / norm[:, None]


def params_to_plane(tri, abc, K: Intrinsics) -> tuple[np.ndarray, float]:
    """Unit normal and depth at the triangle centroid for one patch."""
    tri = np.asarray(tri, dtype=float).reshape(3, 2)
    abc = np.asarray(abc, dtype=float)
    normal = plane_normals(abc[None])[0]
    cx, cy = tri.mean(axis=0)
    u, v = K.normalize(cx, cy)
    s = abc[0] * u + abc[1] * v + abc[2]
    if not s > 0:
        raise InvariantError("patch has non-positive inverse depth at its centroid")
    return normal, float(1.0 / s)


def centroid_depths(cloud: PatchCloud) -> np.ndarray:
    c = cloud.centroids()
    u, v = cloud.intrinsics.normalize(c[:, 0], c[:, 1])
    p = cloud.params
    return 1.0 / (p[:, 0] * u + p[:, 1] * v + p[:, 2])


def _cover_chunk(tris: np.ndarray, offset: int, W: int, H: int) -> np.ndarray:
    big = np.iinfo(np.int64).max
    ids = np.full((H, W), big, dtype=np.int64)
    for f, t in enumerate(tris):
        x0 = max(int(np.floor(t[:, 0].min() - 0.5)), 0)
        x1 = min(int(np.ceil(t[:, 0].max() - 0.5)), W - 1)
        y0 = max(int(np.floor(t[:, 1].min() - 0.5)), 0)
        y1 = min(int(np.ceil(t[:, 1].max() - 0.5)), H - 1)
        if x1 < x0 or y1 < y0:
            continue
        px = np.arange(x0, x1 + 1) + 0.5
        py = (np.arange(y0, y1 + 1) + 0.5)[:, None]
        inside = np.ones((y1 - y0 + 1, x1 - x0 + 1), dtype=bool)
        for k in range(3):
            ax, ay = t[k]
            bx, by = t[(k + 1) % 3]
            e = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
            # inclusive, with slack for rounding so shared edges never leave holes
            tol = 1e-9 * (abs(bx - ax) + abs(by - ay)) * (1.0 + max(abs(ax), abs(ay), abs(bx), abs(by)))
            inside &= e >= -tol
        win = ids[y0 : y1 + 1, x0 : x1 + 1]
        win[inside & (win == big)] = f + offset
    return ids


def face_id_map(mesh_or_cloud, threads: int = 1) -> FaceIdMap:
    """Owner face of every pixel center; ties go to the lowest face index."""
    if isinstance(mesh_or_cloud, Mesh2D):
        tris = mesh_or_cloud.vertices[mesh_or_cloud.faces]
    else:
        tris = mesh_or_cloud.tris
    W, H = int(mesh_or_cloud.width), int(mesh_or_cloud.height)
    tris = np.asarray(tris, dtype=float).reshape(-1, 3, 2)
    if len(tris) == 0:
        return FaceIdMap(np.full((H, W), -1, dtype=np.int64))
    area = 0.5 * (
        (tris[:, 1, 0] - tris[:, 0, 0]) * (tris[:, 2, 1] - tris[:, 0, 1])
        - (tris[:, 1, 1] - tris[:, 0, 1]) * (tris[:, 2, 0] - tris[:, 0, 0])
    )
    if np.any(area <= 0):
        raise InvariantError("face_id_map expects faces with positive signed area")
    big = np.iinfo(np.int64).max
    threads = max(1, int(threads))
    if threads == 1 or len(tris) < 64:
        ids = _cover_chunk(tris, 0, W, H)
    else:
        bounds = np.linspace(0, len(tris), threads + 1).astype(int)
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda k: _cover_chunk(tris[bounds[k] : bounds[k + 1]], bounds[k], W, H), range(threads)))
        ids = parts[0]
        for p in parts[1:]:
            np.minimum(ids, p, out=ids)
    if np.any(ids == big):
        ys, xs = np.nonzero(ids == big)
        raise InvariantError(f"pixel ({int(xs[0])}, {int(ys[0])}) is not covered by any face")
    return FaceIdMap(ids)


def superpixel_pool(f: FeatureMap, ids: FaceIdMap, n_faces: int | None = None):
    """Channel-wise max of ``f`` over each face region.

    Returns ``(pooled, empty)``: an ``(M, C)`` array and a boolean flag per
    face that owns no pixel (its row is zero).
    """
    if (f.height, f.width) != (ids.height, ids.width):
        raise InputError(f"feature map {f.width}x{f.height} does not match id map {ids.width}x{ids.height}")
    if n_faces is None:
        n_faces = int(ids.data.max()) + 1 if ids.data.size else 0
    flat_ids = ids.data.ravel()
    keep = flat_ids >= 0
    flat_ids = flat_ids[keep]
    vals = f.data.reshape(-1, f.channels)[keep]
    pooled = np.full((n_faces, f.channels), -np.inf)
    np.maximum.at(pooled, flat_ids, vals)
    empty = np.bincount(flat_ids, minlength=n_faces) == 0
    pooled[empty] = 0.0
    return pooled, empty


def bilinear(f: np.ndarray, x, y) -> np.ndarray:
    """Sample ``f`` (H, W, C) at continuous pixel coordinates (centers at +0.5)."""
    H, W = f.shape[:2]
    gx = np.clip(np.asarray(x, dtype=float) - 0.5, 0.0, W - 1.0)
    gy = np.clip(np.asarray(y, dtype=float) - 0.5, 0.0, H - 1.0)
    x0 = np.minimum(np.floor(gx).astype(int), max(W - 2, 0))
    y0 = np.minimum(np.floor(gy).astype(int), max(H - 2, 0))
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    tx = (gx - x0)[..., None]
    ty = (gy - y0)[..., None]
    top = f[y0, x0] * (1 - tx) + f[y0, x1] * tx
    bot = f[y1, x0] * (1 - tx) + f[y1, x1] * tx
    return top * (1 - ty) + bot * ty


def centroid_sample(f: FeatureMap, cloud: PatchCloud) -> np.ndarray:
    """Bilinear sample of ``f`` at every face's 2D centroid, ``(M, C)``."""
    if (f.height, f.width) != (cloud.height, cloud.width):
        raise InputError("feature map and patch cloud sizes differ")
    c = cloud.centroids()
    if len(c) == 0:
        return np.zeros((0, f.channels))
    out = (c[:, 0] < 0) | (c[:, 0] > cloud.width) | (c[:, 1] < 0) | (c[:, 1] > cloud.height)
    if np.any(out):
        raise InputError(f"centroid of face {int(np.argmax(out))} lies outside the image")
    return bilinear(f.data, c[:, 0], c[:, 1])
