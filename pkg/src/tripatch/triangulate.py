"""Constraint construction and constrained Delaunay triangulation.

The triangulator inserts points incrementally (Lawson flips, Hilbert-ordered
insertion with walking point location) inside an enclosing box, then inserts
every constraint, including the convex hull edges, by repeatedly flipping the
edges it crosses (Sloan's method) and restoring the Delaunay property around
the new edges. Triangles touching the enclosing box are discarded at the end.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import InputError, InvariantError
from .predicates import incircle, on_segment_interior, orient2d, segments_cross

AREA_EPS = 1e-6
PERTURB = 1e-3
# constraint coordinates live on a dyadic grid so intersection rounding stays controlled
QUANTUM = 2.0**-10
# vertices this close to a segment interior split it
TOUCH_TOL = 0.5 * QUANTUM


@dataclass(frozen=True)
class Mesh2D:
    width: int
    height: int
    vertices: np.ndarray  # (V, 2) float
    segments: np.ndarray  # (S, 2) int
    faces: np.ndarray  # (M, 3) int, positive signed area

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.asarray(self.vertices, dtype=float).reshape(-1, 2))
        object.__setattr__(self, "segments", np.asarray(self.segments, dtype=np.int64).reshape(-1, 2))
        object.__setattr__(self, "faces", np.asarray(self.faces, dtype=np.int64).reshape(-1, 3))

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def face_areas(self) -> np.ndarray:
        return signed_areas(self.vertices, self.faces)

    def triangles(self) -> np.ndarray:
        """Corner coordinates, shape ``(M, 3, 2)``."""
        return self.vertices[self.faces]

    def edges(self) -> set:
        out = set()
        for a, b, c in self.faces.tolist():
            for p, q in ((a, b), (b, c), (c, a)):
                out.add((min(p, q), max(p, q)))
        return out

    def to_dict(self) -> dict:
        return {
            "width": int(self.width),
            "height": int(self.height),
            "vertices": self.vertices.tolist(),
            "segments": self.segments.tolist(),
            "faces": self.faces.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Mesh2D":
        try:
            return cls(int(d["width"]), int(d["height"]), d["vertices"], d.get("segments", []), d["faces"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed mesh JSON: {exc}") from exc


def signed_areas(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    p = vertices[faces]
    return 0.5 * (
        (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    )


# --------------------------------------------------------------------------
# constraint set


class _VertexPool:
    """Vertex list with snapping of near-duplicates onto earlier vertices."""

    def __init__(self, snap_eps: float):
        self.eps = snap_eps
        self.cell = max(snap_eps, 1.0)
        self.pts: list[tuple[float, float]] = []
        self.grid: dict = {}
        self.exact: dict = {}

    def _key(self, x, y):
        return (math.floor(x / self.cell), math.floor(y / self.cell))

    def find(self, x, y, eps):
        hit = self.exact.get((x, y))
        if hit is not None or eps <= 0:
            return hit
        kx, ky = self._key(x, y)
        best = None
        for gx in (kx - 1, kx, kx + 1):
            for gy in (ky - 1, ky, ky + 1):
                for i in self.grid.get((gx, gy), ()):
                    px, py = self.pts[i]
                    if (px - x) ** 2 + (py - y) ** 2 <= eps * eps and (best is None or i < best):
                        best = i
        return best

    def add(self, x, y, eps=None) -> int:
        x, y = round(float(x) / QUANTUM) * QUANTUM, round(float(y) / QUANTUM) * QUANTUM
        i = self.find(x, y, self.eps if eps is None else eps)
        if i is not None:
            return i
        i = len(self.pts)
        self.pts.append((x, y))
        self.exact[(x, y)] = i
        self.grid.setdefault(self._key(x, y), []).append(i)
        return i


def _snap_to_frame(x, y, W, H, eps):
    x = min(max(x, 0.0), float(W))
    y = min(max(y, 0.0), float(H))
    if x <= eps:
        x = 0.0
    elif x >= W - eps:
        x = float(W)
    if y <= eps:
        y = 0.0
    elif y >= H - eps:
        y = float(H)
    return x, y


def _pairs_from_grid(boxes: np.ndarray, cell: float, other: np.ndarray | None = None) -> np.ndarray:
    """Candidate index pairs whose boxes share a grid cell.

    With ``other`` given, pairs are (row of ``other``, row of ``boxes``);
    otherwise unordered pairs within ``boxes`` with the first index smaller.
    """
    def cells(bx):
        g = np.floor(bx / cell).astype(np.int64)
        out = {}
        for idx, (x0, y0, x1, y1) in enumerate(g.tolist()):
            for gx in range(x0, x1 + 1):
                for gy in range(y0, y1 + 1):
                    out.setdefault((gx, gy), []).append(idx)
        return out

    grid = cells(boxes)
    chunks = []
    if other is None:
        for members in grid.values():
            k = len(members)
            if k > 1:
                m = np.asarray(members)
                i, j = np.triu_indices(k, 1)
                chunks.append(np.stack([m[i], m[j]], axis=1))
    else:
        ogrid = cells(other)
        for key, members in ogrid.items():
            segs = grid.get(key)
            if segs:
                a, b = np.meshgrid(np.asarray(members), np.asarray(segs), indexing="ij")
                chunks.append(np.stack([a.ravel(), b.ravel()], axis=1))
    if not chunks:
        return np.zeros((0, 2), dtype=np.int64)
    return np.unique(np.concatenate(chunks), axis=0)


def _orient_np(ax, ay, bx, by, cx, cy):
    """Vectorized orientation sign; 2 where the float filter cannot decide."""
    detl = (ax - cx) * (by - cy)
    detr = (ay - cy) * (bx - cx)
    det = detl - detr
    bound = 3.3306690738754716e-16 * (np.abs(detl) + np.abs(detr))
    return np.where(det > bound, 1, np.where(-det > bound, -1, 2))


def _intersection(a, b, c, d):
    rx, ry = b[0] - a[0], b[1] - a[1]
    sx, sy = d[0] - c[0], d[1] - c[1]
    den = rx * sy - ry * sx
    t = ((c[0] - a[0]) * sy - (c[1] - a[1]) * sx) / den
    return a[0] + t * rx, a[1] + t * ry


def _find_splits(pool: "_VertexPool", seg_list: list, cell: float) -> dict:
    pts = np.asarray(pool.pts, dtype=float)
    seg = np.asarray(seg_list, dtype=np.int64).reshape(-1, 2)
    A, B = pts[seg[:, 0]], pts[seg[:, 1]]
    lo, hi = np.minimum(A, B), np.maximum(A, B)
    boxes = np.hstack([lo - TOUCH_TOL, hi + TOUCH_TOL])
    splits: dict[int, set] = {}

    # vertices touching segment interiors
    vb = np.hstack([pts, pts])
    vs = _pairs_from_grid(boxes, cell, other=vb)
    if len(vs):
        v, s = vs[:, 0], vs[:, 1]
        keep = (v != seg[s, 0]) & (v != seg[s, 1])
        v, s = v[keep], s[keep]
        a, b, p = A[s], B[s], pts[v]
        ab = b - a
        L2 = np.einsum("ij,ij->i", ab, ab)
        t = np.einsum("ij,ij->i", p - a, ab) / np.where(L2 > 0, L2, 1.0)
        q = a + t[:, None] * ab - p
        near = (L2 > 0) & (t > 0) & (t < 1) & (np.einsum("ij,ij->i", q, q) <= TOUCH_TOL**2)
        for vi, si in zip(v[near].tolist(), s[near].tolist()):
            splits.setdefault(si, set()).add(vi)

    # proper crossings
    st = _pairs_from_grid(boxes, cell)
    if len(st):
        s, t = st[:, 0], st[:, 1]
        share = (seg[s, 0] == seg[t, 0]) | (seg[s, 0] == seg[t, 1]) | (seg[s, 1] == seg[t, 0]) | (seg[s, 1] == seg[t, 1])
        overlap = np.all(lo[s] <= hi[t], axis=1) & np.all(lo[t] <= hi[s], axis=1)
        keep = ~share & overlap
        s, t = s[keep], t[keep]
        a, b, c, d = A[s], B[s], A[t], B[t]
        o1 = _orient_np(a[:, 0], a[:, 1], b[:, 0], b[:, 1], c[:, 0], c[:, 1])
        o2 = _orient_np(a[:, 0], a[:, 1], b[:, 0], b[:, 1], d[:, 0], d[:, 1])
        o3 = _orient_np(c[:, 0], c[:, 1], d[:, 0], d[:, 1], a[:, 0], a[:, 1])
        o4 = _orient_np(c[:, 0], c[:, 1], d[:, 0], d[:, 1], b[:, 0], b[:, 1])
        unsure = (o1 == 2) | (o2 == 2) | (o3 == 2) | (o4 == 2)
        sure_cross = ~unsure & (o1 * o2 < 0) & (o3 * o4 < 0)
        check = sure_cross | (unsure & ~((o1 == o2) & (o1 != 2)) & ~((o3 == o4) & (o3 != 2)))
        for si, ti in zip(s[check].tolist(), t[check].tolist()):
            i, j = seg_list[si]
            k, l = seg_list[ti]
            P = pool.pts
            if segments_cross(P[i], P[j], P[k], P[l]):
                x, y = _intersection(P[i], P[j], P[k], P[l])
                v = pool.add(x, y, eps=TOUCH_TOL)
                if v not in (i, j):
                    splits.setdefault(si, set()).add(v)
                if v not in (k, l):
                    splits.setdefault(ti, set()).add(v)
    return splits


def resolve_intersections(pool: "_VertexPool", segs: set, max_rounds: int = 50) -> set:
    """Split segments at touching vertices and at mutual crossings until none remain."""
    for _ in range(max_rounds):
        if not segs:
            return segs
        seg_list = sorted(segs)
        pts = pool.pts
        lengths = [math.dist(pts[i], pts[j]) for i, j in seg_list]
        cell = max(8.0, float(np.median(lengths)))
        splits = _find_splits(pool, seg_list, cell)
        if not splits:
            return segs
        pts = pool.pts
        new = set()
        for s, (i, j) in enumerate(seg_list):
            if s not in splits:
                new.add((i, j))
                continue
            a, b = pts[i], pts[j]
            dx, dy = b[0] - a[0], b[1] - a[1]
            chain = sorted(splits[s], key=lambda v: (pts[v][0] - a[0]) * dx + (pts[v][1] - a[1]) * dy)
            chain = [i] + chain + [j]
            for p, q in zip(chain[:-1], chain[1:]):
                if p != q:
                    new.add((min(p, q), max(p, q)))
        segs = new
    raise InvariantError("constraint intersection resolution did not converge")


def build_constraints(polylines, W: int, H: int, snap_eps: float = 1.0):
    """Vertices and non-crossing segments for the triangulator, framed by the image border.

    Returns ``(vertices, segments)`` as ``(V, 2)`` float and ``(S, 2)`` int arrays.
    """
    if snap_eps < 0:
        raise InputError(f"snap_eps must be >= 0, got {snap_eps}")
    if W <= 0 or H <= 0:
        raise InputError(f"frame must have positive size, got {W}x{H}")
    pool = _VertexPool(snap_eps)
    for x, y in ((0.0, 0.0), (W, 0.0), (W, H), (0.0, H)):
        pool.add(x, y, eps=0.0)

    segs: set = set()
    for pl in polylines:
        ids = []
        for x, y in np.asarray(pl.points, dtype=float).tolist():
            i = pool.add(*_snap_to_frame(x, y, W, H, snap_eps))
            if not ids or ids[-1] != i:
                ids.append(i)
        if pl.closed and len(ids) > 2 and ids[0] == ids[-1]:
            ids.pop()
        pairs = list(zip(ids[:-1], ids[1:]))
        if pl.closed and len(ids) > 2:
            pairs.append((ids[-1], ids[0]))
        for i, j in pairs:
            if i != j:
                segs.add((min(i, j), max(i, j)))

    segs = resolve_intersections(pool, segs)

    pts = pool.pts
    sides = [
        (lambda p: p[1] == 0.0, 0),
        (lambda p: p[0] == W, 1),
        (lambda p: p[1] == H, 0),
        (lambda p: p[0] == 0.0, 1),
    ]
    for on_side, axis in sides:
        ids = sorted((i for i, p in enumerate(pts) if on_side(p)), key=lambda i: pts[i][axis])
        for i, j in zip(ids[:-1], ids[1:]):
            segs.add((min(i, j), max(i, j)))
    # border pieces may overlap interior segments that run along the frame
    segs = resolve_intersections(pool, segs)
    return np.array(pool.pts, dtype=float), np.array(sorted(segs), dtype=np.int64).reshape(-1, 2)


# --------------------------------------------------------------------------
# triangulation


def _hilbert_key(x: int, y: int, n: int) -> int:
    d = 0
    s = n // 2
    while s > 0:
        rx = 1 if (x & s) else 0
        ry = 1 if (y & s) else 0
        d += s * s * ((3 * rx) ^ ry)
        if ry == 0:
            if rx == 1:
                x, y = s - 1 - x, s - 1 - y
            x, y = y, x
        s //= 2
    return d


class _CDT:
    def __init__(self, pts):
        self.pts = [(float(x), float(y)) for x, y in pts]
        n = len(self.pts)
        xs = [p[0] for p in self.pts]
        ys = [p[1] for p in self.pts]
        x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
        margin = max(1.0, math.ceil(0.1 * max(x1 - x0, y1 - y0)))
        bx0, by0 = math.floor(x0) - margin, math.floor(y0) - margin
        bx1, by1 = math.ceil(x1) + margin, math.ceil(y1) + margin
        self.n_input = n
        self.pts += [(bx0, by0), (bx1, by0), (bx1, by1), (bx0, by1)]
        s0, s1, s2, s3 = n, n + 1, n + 2, n + 3
        self.tv = [[s0, s1, s2], [s0, s2, s3]]
        self.tn = [[-1, 1, -1], [-1, -1, 0]]
        self.vt = [-1] * len(self.pts)
        self.vt[s0] = 0
        self.vt[s1] = 0
        self.vt[s2] = 0
        self.vt[s3] = 1
        self.fixed: set = set()
        self.last = 0

    # -- primitives ------------------------------------------------------
    def _orient(self, a, b, c):
        p, q, r = self.pts[a], self.pts[b], self.pts[c]
        return orient2d(p[0], p[1], q[0], q[1], r[0], r[1])

    def _incircle(self, a, b, c, d):
        p, q, r, s = self.pts[a], self.pts[b], self.pts[c], self.pts[d]
        return incircle(p[0], p[1], q[0], q[1], r[0], r[1], s[0], s[1])

    def _repoint(self, t, old, new):
        if t < 0:
            return
        nb = self.tn[t]
        nb[nb.index(old)] = new

    def _rot(self, t, i):
        v, n = self.tv[t], self.tn[t]
        return (v[i], v[(i + 1) % 3], v[(i + 2) % 3]), (n[i], n[(i + 1) % 3], n[(i + 2) % 3])

    def flip(self, t, i):
        """Flip the edge opposite vertex ``i`` of triangle ``t``; returns (t, u) with that vertex at slot 0."""
        (a, b, c), (u, tb, tc) = self._rot(t, i)
        j = self.tn[u].index(t)
        (d, _, _), (_, uc, ub) = self._rot(u, j)
        self.tv[t] = [a, b, d]
        self.tn[t] = [uc, u, tc]
        self.tv[u] = [a, d, c]
        self.tn[u] = [ub, tb, t]
        self._repoint(uc, u, t)
        self._repoint(tb, t, u)
        self.vt[a] = t
        self.vt[b] = t
        self.vt[d] = t
        self.vt[c] = u
        return t, u

    def locate(self, p):
        t = self.last
        px, py = self.pts[p]
        for _ in range(4 * len(self.tv) + 10):
            v = self.tv[t]
            moved = False
            zero = -1
            for k in range(3):
                a, b = self.pts[v[(k + 1) % 3]], self.pts[v[(k + 2) % 3]]
                o = orient2d(a[0], a[1], b[0], b[1], px, py)
                if o < 0:
                    t = self.tn[t][k]
                    moved = True
                    break
                if o == 0:
                    zero = k if zero < 0 else 3
            if not moved:
                return t, zero
        raise InvariantError("point location failed to terminate")

    def _legalize(self, stack):
        while stack:
            t = stack.pop()
            u = self.tn[t][0]
            if u < 0:
                continue
            a, b, c = self.tv[t]
            if (min(b, c), max(b, c)) in self.fixed:
                continue
            d = self.tv[u][self.tn[u].index(t)]
            if self._incircle(a, b, c, d) > 0:
                t, u = self.flip(t, 0)
                stack.append(t)
                stack.append(u)

    def insert(self, p):
        t, zero = self.locate(p)
        if zero == 3:
            raise InvariantError(f"duplicate vertex {p}")
        if zero < 0:
            (a, b, c), (na, nb, nc) = self._rot(t, 0)
            t1, t2 = len(self.tv), len(self.tv) + 1
            self.tv[t] = [p, a, b]
            self.tn[t] = [nc, t1, t2]
            self.tv.append([p, b, c])
            self.tn.append([na, t2, t])
            self.tv.append([p, c, a])
            self.tn.append([nb, t, t1])
            self._repoint(na, t, t1)
            self._repoint(nb, t, t2)
            self.vt[p] = t
            self.vt[a] = t
            self.vt[b] = t1
            self.vt[c] = t2
            self.last = t
            self._legalize([t, t1, t2])
            return
        # p lies on the edge opposite slot ``zero``
        (a, b, c), (u, nb, nc) = self._rot(t, zero)
        j = self.tn[u].index(t)
        (d, _, _), (_, uc, ub) = self._rot(u, j)
        t1, u2 = len(self.tv), len(self.tv) + 1
        self.tv[t] = [p, a, b]
        self.tn[t] = [nc, u2, t1]
        self.tv.append([p, c, a])
        self.tn.append([nb, t, u])
        self.tv[u] = [p, d, c]
        self.tn[u] = [ub, t1, u2]
        self.tv.append([p, b, d])
        self.tn.append([uc, u, t])
        self._repoint(nb, t, t1)
        self._repoint(uc, u, u2)
        for v, tri in ((p, t), (a, t), (b, t), (c, t1), (d, u)):
            self.vt[v] = tri
        self.last = t
        self._legalize([t, t1, u, u2])

    def around(self, p):
        """Triangles incident to vertex ``p`` as ``(t, slot of p)``."""
        t0 = self.vt[p]
        t = t0
        while True:
            i = self.tv[t].index(p)
            yield t, i
            t = self.tn[t][(i + 2) % 3]
            if t == t0:
                return
            if t < 0:
                break
        # open fan (vertex on the enclosing box): sweep the other way too
        t = self.tn[t0][(self.tv[t0].index(p) + 1) % 3]
        while t >= 0:
            i = self.tv[t].index(p)
            yield t, i
            t = self.tn[t][(i + 1) % 3]

    def find_edge(self, p, q):
        """``(t, k)`` with the edge opposite slot ``k`` of ``t`` equal to {p, q}, or None."""
        for t, i in self.around(p):
            v = self.tv[t]
            if v[(i + 1) % 3] == q:
                return t, (i + 2) % 3
            if v[(i + 2) % 3] == q:
                return t, (i + 1) % 3
        return None

    # -- constraints -----------------------------------------------------
    def _crossed_edges(self, a, b):
        """Edges crossed by segment ab, or ('vertex', w) when a vertex lies on it."""
        for t, i in self.around(a):
            v = self.tv[t]
            p, q = v[(i + 1) % 3], v[(i + 2) % 3]
            for w in (p, q):
                if self._orient(a, b, w) == 0 and on_segment_interior(self.pts[w], self.pts[a], self.pts[b]):
                    return ("vertex", w)
            if self._orient(a, p, b) > 0 and self._orient(a, q, b) < 0:
                break
        else:
            raise InvariantError(f"cannot start constraint walk at vertex {a}")
        crossed = []
        u = self.tn[t][i]
        while True:
            if (min(p, q), max(p, q)) in self.fixed:
                raise InvariantError(f"constraint {a}-{b} crosses constraint {p}-{q}")
            crossed.append((p, q))
            j = self.tn[u].index(t)
            w = self.tv[u][j]
            if w == b:
                return crossed
            o = self._orient(a, b, w)
            if o == 0:
                return ("vertex", w)
            if o == self._orient(a, b, p):
                p = w
            else:
                q = w
            t = u
            v = self.tv[t]
            for m in range(3):
                if {v[(m + 1) % 3], v[(m + 2) % 3]} == {p, q}:
                    u = self.tn[t][m]
                    break

    def insert_constraint(self, a, b):
        todo = [(a, b)]
        while todo:
            a, b = todo.pop()
            if a == b:
                continue
            if self.find_edge(a, b) is not None:
                self.fixed.add((min(a, b), max(a, b)))
                continue
            crossed = self._crossed_edges(a, b)
            if isinstance(crossed, tuple):
                w = crossed[1]
                todo.append((a, w))
                todo.append((w, b))
                continue
            self._flip_out(a, b, crossed)
            self.fixed.add((min(a, b), max(a, b)))

    def _flip_out(self, a, b, crossed):
        queue = deque(crossed)
        new_edges = []
        stall = 0
        while queue:
            p, q = queue.popleft()
            found = self.find_edge(p, q)
            if found is None:
                raise InvariantError(f"lost edge {p}-{q} during constraint insertion")
            t, k = found
            x = self.tv[t][k]
            u = self.tn[t][k]
            y = self.tv[u][self.tn[u].index(t)]
            o1, o2 = self._orient(x, y, p), self._orient(x, y, q)
            if o1 == 0 or o2 == 0 or o1 == o2:
                queue.append((p, q))
                stall += 1
                if stall > 4 * len(queue) + 8:
                    raise InvariantError(f"constraint {a}-{b} insertion stalled")
                continue
            stall = 0
            self.flip(t, k)
            if x in (a, b) or y in (a, b):
                new_edges.append((x, y))
                continue
            ox, oy = self._orient(a, b, x), self._orient(a, b, y)
            if ox != 0 and oy != 0 and ox != oy:
                queue.append((x, y))
            else:
                new_edges.append((x, y))
        key = (min(a, b), max(a, b))
        changed = True
        while changed:
            changed = False
            for n, (p, q) in enumerate(new_edges):
                if (min(p, q), max(p, q)) == key or (min(p, q), max(p, q)) in self.fixed:
                    continue
                found = self.find_edge(p, q)
                if found is None:
                    continue
                t, k = found
                u = self.tn[t][k]
                if u < 0:
                    continue
                x = self.tv[t][k]
                y = self.tv[u][self.tn[u].index(t)]
                a0, b0, c0 = self._rot(t, k)[0]
                if self._incircle(a0, b0, c0, y) > 0:
                    self.flip(t, k)
                    new_edges[n] = (x, y)
                    changed = True

    def faces(self):
        n = self.n_input
        return [list(v) for v in self.tv if v[0] < n and v[1] < n and v[2] < n]


def _hull(pts):
    """Strict convex hull (no collinear points) in positive-area order."""
    order = sorted(range(len(pts)), key=lambda i: pts[i])

    def half(seq):
        out = []
        for i in seq:
            while len(out) >= 2:
                a, b = pts[out[-2]], pts[out[-1]]
                if orient2d(a[0], a[1], b[0], b[1], pts[i][0], pts[i][1]) <= 0:
                    out.pop()
                else:
                    break
            out.append(i)
        return out

    lower = half(order)
    upper = half(reversed(order))
    return lower[:-1] + upper[:-1]


def _cdt_once(pts, segments):
    n = len(pts)
    cdt = _CDT(pts)
    xs = [p[0] for p in cdt.pts[:n]]
    ys = [p[1] for p in cdt.pts[:n]]
    x0, y0 = min(xs), min(ys)
    span = max(max(xs) - x0, max(ys) - y0, 1e-12)
    side = 1 << 16
    keys = [
        _hilbert_key(int((x - x0) / span * (side - 1)), int((y - y0) / span * (side - 1)), side)
        for x, y in cdt.pts[:n]
    ]
    for p in sorted(range(n), key=lambda i: (keys[i], i)):
        cdt.insert(p)
    hull = _hull(cdt.pts[:n])
    if len(hull) < 3:
        raise InputError("triangulation input is collinear")
    for i, j in segments:
        cdt.insert_constraint(int(i), int(j))
    for i, j in zip(hull, hull[1:] + hull[:1]):
        cdt.insert_constraint(i, j)
    return np.array(cdt.faces(), dtype=np.int64).reshape(-1, 3)


def _nudge(pts, face, width, height) -> None:
    """Push one corner of a sliver face away from its opposite edge.

    The apex opposite the longest edge goes first. Vertices on the frame may
    only slide along it, so a pinned image corner hands the move to the next
    vertex.
    """
    tri = pts[face]
    lengths = [float(np.linalg.norm(tri[(k + 2) % 3] - tri[(k + 1) % 3])) for k in range(3)]
    for k in sorted(range(3), key=lambda k: (-lengths[k], k)):
        v = int(face[k])
        e = tri[(k + 2) % 3] - tri[(k + 1) % 3]
        # positive-area order puts each vertex on the left of its opposite edge
        move = np.array([-e[1], e[0]]) / max(lengths[k], 1e-300)
        x, y = pts[v]
        if x == 0.0 or x == width:
            move[0] = 0.0
        if y == 0.0 or y == height:
            move[1] = 0.0
        if np.linalg.norm(move) < 1e-6:
            continue
        move /= np.linalg.norm(move)
        step = PERTURB * (1.0 + (v % 7) / 7.0)
        cand = pts[v] + step * move
        cand[0] = min(max(cand[0], 0.0), width)
        cand[1] = min(max(cand[1], 0.0), height)
        if np.any(cand != pts[v]):
            pts[v] = cand
            return


def triangulate_cdt(vertices, segments, width: int | None = None, height: int | None = None) -> Mesh2D:
    """Constrained Delaunay triangulation of ``vertices`` honoring ``segments``.

    Near-zero-area faces (area <= 1e-6 px^2) are removed by nudging the apex
    opposite the longest edge 1e-3 px away from that edge and re-triangulating.
    """
    pts = np.asarray(vertices, dtype=float).reshape(-1, 2)
    segments = np.asarray(segments, dtype=np.int64).reshape(-1, 2)
    if len(pts) < 3:
        raise InputError("triangulation needs at least 3 vertices")
    if len({(x, y) for x, y in pts.tolist()}) != len(pts):
        raise InputError("triangulation input contains duplicate vertices")
    if len(segments) and (segments.min() < 0 or segments.max() >= len(pts)):
        raise InputError("segment index out of range")
    if width is None:
        width = float(pts[:, 0].max())
    if height is None:
        height = float(pts[:, 1].max())

    pts = pts.copy()
    for attempt in range(20):
        faces = _cdt_once([tuple(p) for p in pts.tolist()], segments.tolist())
        areas = signed_areas(pts, faces)
        if np.any(areas <= 0):
            bad = np.nonzero(areas <= 0)[0]
            raise InvariantError(f"triangulation produced {len(bad)} non-positive faces")
        slivers = np.nonzero(areas <= AREA_EPS)[0]
        if len(slivers) == 0:
            return Mesh2D(width, height, pts, segments, faces)
        for f in slivers.tolist():
            _nudge(pts, faces[f], width, height)
    raise InvariantError("could not remove degenerate faces by perturbation")
