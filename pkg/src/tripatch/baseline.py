"""Naive mesh baseline: dense depth mesh, quadric edge-collapse decimation, render.

Collapses place the merged vertex at one of the two endpoints or at their
midpoint, so every surviving vertex is a convex combination of input points
and a rendered depth never leaves the input depth range.
"""

from __future__ import annotations

import heapq
import logging

import numpy as np

from .errors import InputError
from .ingest import DepthMap, Intrinsics, backproject
from .render import rasterize_mesh3d, write_obj

log = logging.getLogger(__name__)

# weight of the planes that pin boundary edges, relative to area-weighted face planes
BOUNDARY_WEIGHT = 1e3


def grid_mesh(depth: DepthMap, K: Intrinsics) -> tuple[np.ndarray, np.ndarray]:
    """One vertex per valid pixel; two triangles per fully valid 2x2 cell.

    Cells are split along the top-left to bottom-right diagonal. A map with
    no fully valid cell gives an empty face array.
    """
    valid = depth.valid
    if depth.n_valid < 4:
        raise InputError("grid mesh needs at least 4 valid depth pixels")
    pts = backproject(depth.data, K)
    index = np.full(valid.shape, -1, dtype=np.int64)
    index[valid] = np.arange(int(valid.sum()))
    verts = pts[valid]
    tl, tr = index[:-1, :-1], index[:-1, 1:]
    bl, br = index[1:, :-1], index[1:, 1:]
    cell = (tl >= 0) & (tr >= 0) & (bl >= 0) & (br >= 0)
    f1 = np.stack([tl[cell], br[cell], tr[cell]], axis=1)
    f2 = np.stack([tl[cell], bl[cell], br[cell]], axis=1)
    faces = np.stack([f1, f2], axis=1).reshape(-1, 3)
    return verts, faces


def _plane_quadric(n, d, w):
    p = np.append(n, d)
    return w * np.outer(p, p)


def _image_area(tris):
    q = tris[..., :2] / tris[..., 2:]
    return (q[:, 1, 0] - q[:, 0, 0]) * (q[:, 2, 1] - q[:, 0, 1]) - (q[:, 1, 1] - q[:, 0, 1]) * (q[:, 2, 0] - q[:, 0, 0])


class _Decimator:
    def __init__(self, verts, faces):
        self.V = np.array(verts, dtype=float)
        self.F = [list(f) for f in np.asarray(faces, dtype=np.int64).tolist()]
        self.alive_f = [True] * len(self.F)
        self.n_faces = len(self.F)
        nv = len(self.V)
        self.vf = [set() for _ in range(nv)]
        for i, f in enumerate(self.F):
            for v in f:
                self.vf[v].add(i)
        self.alive_v = np.array([len(s) > 0 for s in self.vf])
        self.version = np.zeros(nv, dtype=np.int64)
        self.Q = np.zeros((nv, 4, 4))
        for f in self.F:
            p0, p1, p2 = self.V[f]
            n = np.cross(p1 - p0, p2 - p0)
            area2 = np.linalg.norm(n)
            if area2 == 0:
                continue
            n = n / area2
            q = _plane_quadric(n, -n @ p0, 0.5 * area2)
            for v in f:
                self.Q[v] += q
        edge_faces: dict = {}
        for i, f in enumerate(self.F):
            for k in range(3):
                e = (min(f[k], f[(k + 1) % 3]), max(f[k], f[(k + 1) % 3]))
                edge_faces.setdefault(e, []).append(i)
        for (a, b), fs in edge_faces.items():
            if len(fs) != 1:
                continue
            p0, p1, p2 = self.V[self.F[fs[0]]]
            fn = np.cross(p1 - p0, p2 - p0)
            m = np.cross(self.V[b] - self.V[a], fn)
            norm = np.linalg.norm(m)
            if norm == 0:
                continue
            m = m / norm
            q = _plane_quadric(m, -m @ self.V[a], BOUNDARY_WEIGHT * float(np.sum((self.V[b] - self.V[a]) ** 2)))
            self.Q[a] += q
            self.Q[b] += q
        self.heap: list = []
        for a, b in sorted(edge_faces):
            self._push(a, b)

    def neighbors(self, v):
        out = set()
        for f in self.vf[v]:
            out.update(self.F[f])
        out.discard(v)
        return out

    def _candidates(self, a, b):
        Q = self.Q[a] + self.Q[b]
        P = np.ones((3, 4))
        P[0, :3] = self.V[a]
        P[1, :3] = self.V[b]
        P[2, :3] = 0.5 * (self.V[a] + self.V[b])
        err = np.maximum(np.einsum("ki,ij,kj->k", P, Q, P), 0.0).tolist()
        return sorted(((err[k], k, P[k, :3]) for k in range(3)), key=lambda t: (t[0], t[1]))

    def _push(self, a, b):
        cost = self._candidates(a, b)[0][0]
        length = float(np.sum((self.V[a] - self.V[b]) ** 2))
        heapq.heappush(self.heap, (cost, length, a, b, int(self.version[a]), int(self.version[b])))

    def _is_boundary_edge(self, a, b):
        return len(self.vf[a] & self.vf[b]) == 1

    def _is_boundary_vertex(self, v):
        return any(self._is_boundary_edge(v, w) for w in self.neighbors(v))

    def _topology_ok(self, a, b):
        shared = self.vf[a] & self.vf[b]
        if not shared or shared == self.vf[a] | self.vf[b]:
            # the second case would delete a whole component
            return False
        opposite = set()
        for f in shared:
            opposite.update(self.F[f])
        opposite -= {a, b}
        if self.neighbors(a) & self.neighbors(b) != opposite:
            return False
        # an interior edge joining two boundary vertices would pinch the surface
        if len(shared) == 2 and self._is_boundary_vertex(a) and self._is_boundary_vertex(b):
            return False
        return True

    def _placement_ok(self, a, b, p):
        tris, moved = [], []
        for v in (a, b):
            for f in self.vf[v]:
                tri = self.F[f]
                if a in tri and b in tri:
                    continue
                tris.append(tri)
                moved.append(tri.index(v))
        if not tris:
            return True
        old = self.V[np.array(tris)]
        new = old.copy()
        new[np.arange(len(tris)), moved] = p
        n_old = np.cross(old[:, 1] - old[:, 0], old[:, 2] - old[:, 0])
        n_new = np.cross(new[:, 1] - new[:, 0], new[:, 2] - new[:, 0])
        if np.any(np.einsum("ij,ij->i", n_old, n_new) <= 0):
            return False
        # orientation as seen from the camera must survive too
        ao = _image_area(old)
        an = _image_area(new)
        return not np.any((ao * an <= 0) | (np.abs(an) <= 1e-12 * np.abs(ao)))

    def _collapse(self, a, b, p):
        for f in list(self.vf[a] & self.vf[b]):
            self.alive_f[f] = False
            self.n_faces -= 1
            for v in self.F[f]:
                self.vf[v].discard(f)
        for f in self.vf[b]:
            tri = self.F[f]
            tri[tri.index(b)] = a
            self.vf[a].add(f)
        self.vf[b] = set()
        self.alive_v[b] = False
        self.V[a] = p
        self.Q[a] += self.Q[b]
        self.version[a] += 1
        self.version[b] += 1
        for w in sorted(self.neighbors(a)):
            self._push(min(a, w), max(a, w))

    def run(self, target):
        while self.n_faces > target and self.heap:
            cost, _, a, b, va, vb = heapq.heappop(self.heap)
            if not (self.alive_v[a] and self.alive_v[b]) or va != self.version[a] or vb != self.version[b]:
                continue
            if not self._topology_ok(a, b):
                continue
            for _, k, p in self._candidates(a, b):
                if self._placement_ok(a, b, p):
                    self._collapse(a, b, p)
                    break

    def result(self):
        keep = np.nonzero(self.alive_v)[0]
        remap = np.full(len(self.V), -1, dtype=np.int64)
        remap[keep] = np.arange(len(keep))
        faces = np.array([self.F[i] for i in range(len(self.F)) if self.alive_f[i]], dtype=np.int64).reshape(-1, 3)
        return self.V[keep].copy(), remap[faces]


def decimate(vertices3d, faces, target_faces: int) -> tuple[np.ndarray, np.ndarray]:
    """Quadric edge-collapse decimation down to at most ``target_faces`` faces.

    Collapses that break the link condition, pinch the boundary or flip a
    face (in 3D or as seen from the camera) are skipped. If no legal
    collapse is left before the target is reached, the mesh is returned as
    is and the achieved count is logged.
    """
    if target_faces < 4:
        raise InputError(f"target face count must be at least 4, got {target_faces}")
    V = np.asarray(vertices3d, dtype=float).reshape(-1, 3)
    F = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if len(F) <= target_faces:
        return V.copy(), F.copy()
    dec = _Decimator(V, F)
    dec.run(target_faces)
    if dec.n_faces > target_faces:
        log.warning("decimation stopped at %d faces (target %d)", dec.n_faces, target_faces)
    return dec.result()


def run_baseline(depth: DepthMap, K: Intrinsics, target_faces: int, dump_obj=None, threads: int = 1):
    """Render a decimated dense mesh of ``depth``; returns ``(DepthMap, n_faces)``."""
    verts, faces = grid_mesh(depth, K)
    verts, faces = decimate(verts, faces, target_faces)
    if dump_obj is not None:
        write_obj(dump_obj, verts, faces, header=f"decimated grid mesh, {len(faces)} faces")
    return rasterize_mesh3d(verts, faces, K, depth.width, depth.height, threads=threads), len(faces)
