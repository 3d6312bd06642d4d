"""Depth + normal loss over rendered patch clouds and direct per-face fitting.

Because every pixel's owner face is fixed by the 2D mesh, the loss splits
into independent per-face terms. The fitting loop exploits this: each face
takes RMSprop-scaled steps in face-local coordinates with its own step size,
and a step is kept only if that face's term does not increase.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .ingest import DepthMap, Intrinsics, NormalMap
from .patchcloud import FaceIdMap, PatchCloud, detach_faces, face_id_map, plane_normals
from .render import rasterize_patches
from .triangulate import Mesh2D

S_MIN = 1e-3
DEPTH_TERMS = ("l1", "signed-mean")


@dataclass(frozen=True)
class FitConfig:
    lambda_n: float = 0.5
    iterations: int = 500
    step_size: float = 1e-2
    depth_term: str = "l1"
    init_depth: float = 2.0

    def __post_init__(self):
        if not self.lambda_n >= 0:
            raise InputError(f"lambda_n must be >= 0, got {self.lambda_n}")
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise InputError(f"iterations must be a positive integer, got {self.iterations}")
        if not self.step_size > 0:
            raise InputError(f"step_size must be positive, got {self.step_size}")
        if self.depth_term not in DEPTH_TERMS:
            raise InputError(f"depth_term must be one of {DEPTH_TERMS}, got {self.depth_term!r}")
        if not self.init_depth > 0:
            raise InputError(f"init_depth must be positive, got {self.init_depth}")


class _Problem:
    """Pixel data of the loss, flattened and grouped by owning face."""

    def __init__(self, cloud: PatchCloud, ids: FaceIdMap, Dstar: DepthMap, Nstar: NormalMap | None, cfg: FitConfig):
        if (Dstar.width, Dstar.height) != (cloud.width, cloud.height):
            raise InputError(
                f"GT depth is {Dstar.width}x{Dstar.height} but the patch cloud is {cloud.width}x{cloud.height}"
            )
        mask = (ids.data >= 0) & Dstar.valid
        self.n = int(mask.sum())
        if self.n == 0:
            raise InputError("no pixel is valid in both the GT depth and the render")
        self.M = cloud.n_faces
        self.cfg = cfg
        u, v = cloud.intrinsics.pixel_grid(cloud.width, cloud.height)
        self.face = ids.data[mask]
        self.u = u[mask]
        self.v = v[mask]
        self.d = Dstar.data[mask]
        self.count = np.bincount(self.face, minlength=self.M)
        self.nsum = np.zeros((self.M, 3))
        if cfg.lambda_n > 0:
            if Nstar is None:
                raise InputError("a GT normal map is required when lambda_n > 0")
            if (Nstar.width, Nstar.height) != (cloud.width, cloud.height):
                raise InputError("GT normal map size does not match the patch cloud")
            nrm = Nstar.data[mask]
            for k in range(3):
                self.nsum[:, k] = np.bincount(self.face, weights=nrm[:, k], minlength=self.M)

    def residual(self, params):
        p = params[self.face]
        s = p[:, 0] * self.u + p[:, 1] * self.v + p[:, 2]
        return 1.0 / s - self.d, s

    def face_terms(self, params):
        """Per-face depth and normal sums (not yet divided by n)."""
        r, s = self.residual(params)
        rho = np.abs(r) if self.cfg.depth_term == "l1" else r
        depth = np.bincount(self.face, weights=rho, minlength=self.M)
        cos = np.einsum("ij,ij->i", plane_normals(params), self.nsum) if self.M else np.zeros(0)
        return depth, -cos

    def face_objective(self, params):
        depth, normal = self.face_terms(params)
        return depth + self.cfg.lambda_n * normal

    def totals(self, params):
        depth, normal = self.face_terms(params)
        ld = float(depth.sum()) / self.n
        ln = float(normal.sum()) / self.n
        # summing the per-face objectives keeps L_sum monotone whenever every face is
        total = float((depth + self.cfg.lambda_n * normal).sum()) / self.n
        return total, ld, ln

    def face_gradient(self, params, tau=None):
        """Gradient of the per-face sums with respect to ``(a, b, c)``, ``(M, 3)``.

        With ``tau`` (per face) the L1 kink is replaced by a pseudo-Huber
        corner of that width, which gives usable descent directions near
        points where some residuals vanish.
        """
        r, s = self.residual(params)
        if self.cfg.depth_term != "l1":
            w = np.ones_like(r)
        elif tau is None:
            w = np.sign(r)
        else:
            t = tau[self.face]
            w = r / np.sqrt(r * r + t * t)
        w = -w / (s * s)
        g = np.zeros((self.M, 3))
        g[:, 0] = np.bincount(self.face, weights=w * self.u, minlength=self.M)
        g[:, 1] = np.bincount(self.face, weights=w * self.v, minlength=self.M)
        g[:, 2] = np.bincount(self.face, weights=w, minlength=self.M)
        if self.cfg.lambda_n > 0 and self.M:
            norm = np.linalg.norm(params, axis=1)
            unit = params / norm[:, None]
            proj = np.einsum("ij,ij->i", unit, self.nsum)
            g += self.cfg.lambda_n * (self.nsum - proj[:, None] * unit) / norm[:, None]
        g[self.count == 0] = 0.0
        return g


def loss(cloud: PatchCloud, Dstar: DepthMap, Nstar: NormalMap | None, cfg: FitConfig = FitConfig(), ids=None):
    """``(L_sum, L_depth, L_normal)`` of the rendered cloud against GT depth and normals.

    Pixels count when they are valid in both the GT depth and the render;
    the same mask serves both terms. GT normals are only read when
    ``cfg.lambda_n > 0``.
    """
    if (Dstar.width, Dstar.height) != (cloud.width, cloud.height):
        raise InputError(f"GT depth is {Dstar.width}x{Dstar.height} but the patch cloud is {cloud.width}x{cloud.height}")
    D, N, ids = rasterize_patches(cloud, ids)
    mask = D.valid & Dstar.valid
    n = int(mask.sum())
    if n == 0:
        raise InputError("no pixel is valid in both the GT depth and the render")
    r = D.data[mask] - Dstar.data[mask]
    l_depth = float(np.abs(r).sum() if cfg.depth_term == "l1" else r.sum()) / n
    l_normal = 0.0
    if cfg.lambda_n > 0:
        if Nstar is None:
            raise InputError("a GT normal map is required when lambda_n > 0")
        if (Nstar.width, Nstar.height) != (cloud.width, cloud.height):
            raise InputError("GT normal map size does not match the patch cloud")
        l_normal = -float(np.einsum("ij,ij->i", N.data[mask], Nstar.data[mask]).sum()) / n
    return l_depth + cfg.lambda_n * l_normal, l_depth, l_normal


def loss_gradient(cloud: PatchCloud, Dstar: DepthMap, Nstar: NormalMap | None, cfg: FitConfig = FitConfig(), ids=None):
    """Exact ``dL_sum / d(a, b, c)`` for every face, ``(M, 3)``; the L1 kink uses subgradient 0."""
    if ids is None:
        ids = face_id_map(cloud)
    prob = _Problem(cloud, ids, Dstar, Nstar, cfg)
    return prob.face_gradient(cloud.params) / prob.n


def _local_frames(cloud: PatchCloud, prob: _Problem):
    """Per-face whitening frames: center ``(M, 2)`` and matrix ``(M, 2, 2)``.

    In the coordinates ``xi = W (u - center)`` a face's pixels have unit
    covariance, so the three fitting parameters are decoupled and equally
    scaled even for thin faces. Faces with too few pixels fall back to the
    corner geometry.
    """
    cu, cv = cloud.corner_uv()
    corners = np.stack([cu, cv], axis=-1)
    center = corners.mean(axis=1)
    cov = np.einsum("mki,mkj->mij", corners - center[:, None], corners - center[:, None]) / 3.0
    cnt = np.bincount(prob.face, minlength=prob.M).astype(float)
    if prob.n:
        uv = np.stack([prob.u, prob.v], axis=1)
        sums = np.stack([np.bincount(prob.face, weights=uv[:, k], minlength=prob.M) for k in range(2)], axis=1)
        mean = sums / np.maximum(cnt, 1)[:, None]
        d = uv - mean[prob.face]
        pc = np.zeros((prob.M, 2, 2))
        for i in range(2):
            for j in range(2):
                pc[:, i, j] = np.bincount(prob.face, weights=d[:, i] * d[:, j], minlength=prob.M)
        pc /= np.maximum(cnt, 1)[:, None, None]
        use = cnt >= 3
        center[use] = mean[use]
        cov[use] = pc[use]
    # a floor keeps one-pixel-wide faces invertible
    tr = np.trace(cov, axis1=1, axis2=2)
    cov = cov + (1e-3 * tr + 1e-300)[:, None, None] * np.eye(2)
    w, V = np.linalg.eigh(cov)
    W = np.einsum("mij,mj,mkj->mik", V, 1.0 / np.sqrt(w), V)
    return center, W


def _to_abc(local, center, W):
    ab = np.einsum("mji,mj->mi", W, local[:, :2])
    return np.concatenate([ab, (local[:, 2] - np.einsum("mi,mi->m", ab, center))[:, None]], axis=1)


def _to_local(abc, center, W):
    # a*u + b*v + c = g . xi + c' with xi = W (u - center)
    g = np.linalg.solve(np.transpose(W, (0, 2, 1)), abc[:, :2, None])[:, :, 0]
    return np.concatenate([g, (abc[:, 2] + np.einsum("mi,mi->m", abc[:, :2], center))[:, None]], axis=1)


_SUBSETS = [(0,), (1,), (2,), (0, 1), (0, 2), (1, 2), (0, 1, 2)]


def _corner_rows(cloud: PatchCloud, center, W):
    """Rows ``A`` with ``A @ local`` = inverse depth at the three corners, ``(M, 3, 3)``."""
    cu, cv = cloud.corner_uv()
    xi = np.einsum("mij,mkj->mki", W, np.stack([cu, cv], axis=-1) - center[:, None])
    return np.concatenate([xi, np.ones(xi.shape[:2] + (1,))], axis=2)


def _project(A, y):
    """Euclidean projection of local parameters onto ``{x : A x >= S_MIN}``.

    Each face has only three constraints, so the active set is found by
    trying every subset and keeping the one satisfying the KKT conditions.
    """
    out = y.copy()
    todo = np.any(np.einsum("mkj,mj->mk", A, y) < S_MIN, axis=1)
    for sub in _SUBSETS:
        if not np.any(todo):
            break
        idx = np.nonzero(todo)[0]
        As = A[idx][:, list(sub)]
        G = np.einsum("mki,mli->mkl", As, As)
        rhs = S_MIN - np.einsum("mki,mi->mk", As, y[idx])
        ok = np.abs(np.linalg.det(G)) > 1e-12 * np.einsum("mkk->m", G) ** len(sub)
        lam = np.zeros_like(rhs)
        if np.any(ok):
            lam[ok] = np.linalg.solve(G[ok], rhs[ok][..., None])[..., 0]
        x = y[idx] + np.einsum("mki,mk->mi", As, lam)
        feas = np.all(np.einsum("mkj,mj->mk", A[idx], x) >= S_MIN * (1 - 1e-12), axis=1)
        good = ok & feas & np.all(lam >= 0, axis=1)
        out[idx[good]] = x[good]
        todo[idx[good]] = False
    return out


def fit(mesh: Mesh2D, Dstar: DepthMap, Nstar: NormalMap | None, K: Intrinsics, cfg: FitConfig = FitConfig(), threads: int = 1):
    """Fit every patch's plane to GT depth (and normals) by per-face adaptive descent.

    Returns ``(cloud, trace)`` where ``trace`` holds ``(L_sum, L_depth,
    L_normal)`` after each iteration. Faces without valid GT pixels keep
    their fronto-parallel initialization.
    """
    cloud = detach_faces(mesh, K, cfg.init_depth)
    ids = face_id_map(cloud, threads=threads)
    prob = _Problem(cloud, ids, Dstar, Nstar, cfg)
    active = prob.count > 0

    center, W = _local_frames(cloud, prob)
    A = _corner_rows(cloud, center, W)
    abc = cloud.params.copy()
    obj = prob.face_objective(abc)
    step = np.full((prob.M, 3), float(cfg.step_size))
    sq = np.zeros((prob.M, 3))
    prev = np.zeros((prob.M, 3))
    beta, eps = 0.9, 1e-3
    trace = []
    for it in range(1, int(cfg.iterations) + 1):
        res, _ = prob.residual(abc)
        # smoothing width tracks each face's current mean absolute residual
        tau = 0.1 * np.bincount(prob.face, weights=np.abs(res), minlength=prob.M) / np.maximum(prob.count, 1)
        g_abc = prob.face_gradient(abc, np.maximum(tau, 1e-300))
        # chain rule through abc = _to_abc(local)
        g_ab = g_abc[:, :2] - g_abc[:, 2:] * center
        g = np.concatenate([np.einsum("mij,mj->mi", W, g_ab), g_abc[:, 2:]], axis=1)
        sq = beta * sq + (1 - beta) * g * g
        scale = np.sqrt(sq / (1 - beta**it))
        # a relative floor stops rounding noise in unconstrained directions from being blown up to unit steps
        direction = g / (scale + eps * scale.max(axis=1, keepdims=True) + 1e-300)
        # per-parameter steps grow while a gradient component keeps its sign and shrink when it flips
        agree = np.sign(g) * np.sign(prev)
        step = step * np.where(agree > 0, 1.2, np.where(agree < 0, 0.5, 1.0))
        prev = g
        local = _to_local(abc, center, W)
        trial = _to_abc(_project(A, local - step * direction), center, W)
        trial_obj = prob.face_objective(trial)
        accept = active & (trial_obj <= obj)
        abc[accept] = trial[accept]
        obj[accept] = trial_obj[accept]
        step[~accept] *= 0.5
        # keep steps from vanishing into denormals once a face has converged
        step = np.clip(step, 1e-14, 1.0)
        trace.append(prob.totals(abc))
    return cloud.with_params(abc), trace


def write_trace(trace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "L_sum", "L_depth", "L_normal"])
        for i, (ls, ld, ln) in enumerate(trace, start=1):
            w.writerow([i, f"{ls:.17g}", f"{ld:.17g}", f"{ln:.17g}"])
