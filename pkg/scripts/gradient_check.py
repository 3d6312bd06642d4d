"""Compare analytic loss gradients with central finite differences on random clouds."""

from __future__ import annotations

import argparse

import numpy as np

from tripatch.ingest import DepthMap, Intrinsics, NormalMap
from tripatch.optimize import loss, loss_gradient
from tripatch.patchcloud import detach_faces, face_id_map
from tripatch.triangulate import build_constraints, triangulate_cdt


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--step", type=float, default=1e-6)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    W, H = 24, 18
    for t in range(args.trials):
        v, s = build_constraints([], W, H, 0.0)
        mesh = triangulate_cdt(np.vstack([v, rng.uniform(1, [W - 1, H - 1], (10, 2))]), s, W, H)
        K = Intrinsics.centered(W, H, 20.0)
        M = mesh.n_faces
        cloud = detach_faces(mesh, K).with_params(
            np.column_stack([rng.uniform(-0.1, 0.1, M), rng.uniform(-0.1, 0.1, M), rng.uniform(0.3, 1.0, M)])
        )
        Dstar = DepthMap(rng.uniform(1, 3, (H, W)))
        n = rng.normal(size=(H, W, 3))
        Nstar = NormalMap(n / np.linalg.norm(n, axis=2, keepdims=True))
        ids = face_id_map(cloud)
        g = loss_gradient(cloud, Dstar, Nstar, ids=ids)
        fd = np.zeros_like(g)
        for m in range(M):
            for k in range(3):
                p1, p2 = cloud.params.copy(), cloud.params.copy()
                p1[m, k] += args.step
                p2[m, k] -= args.step
                l1 = loss(cloud.with_params(p1), Dstar, Nstar, ids=ids)[0]
                l2 = loss(cloud.with_params(p2), Dstar, Nstar, ids=ids)[0]
                fd[m, k] = (l1 - l2) / (2 * args.step)
        nz = fd != 0
        rel = np.abs(g - fd)[nz] / np.abs(fd)[nz]
        print(f"trial {t}: {M} faces, max rel err {rel.max():.2e}, median {np.median(rel):.2e}")


if __name__ == "__main__":
    main()
