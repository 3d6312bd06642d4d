"""Command-line entry point: ``tripatch {mesh,fit,render,baseline,eval,export}``.

Exit codes: 0 on success, 1 for bad input, 2 when an internal invariant
breaks. Worker threads come from ``--threads`` or, failing that, the
``TRIPATCH_THREADS`` environment variable.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import jsonio
from .baseline import run_baseline
from .errors import InputError, InvariantError
from .ingest import (
    DEFAULT_DEPTH_SCALE,
    DepthMap,
    NormalMap,
    load_depth,
    load_image,
    load_intrinsics,
    load_normals,
    normals_from_depth,
    save_depth,
    save_normals,
)
from .metrics import evaluate, param_count
from .optimize import DEPTH_TERMS, FitConfig, fit, write_trace
from .patchcloud import PatchCloud
from .pipeline import MeshConfig, extract_mesh
from .render import export_obj, rasterize_patches
from .triangulate import Mesh2D

log = logging.getLogger("tripatch")


def _threads(args) -> int:
    if args.threads is not None:
        n = args.threads
    else:
        raw = os.environ.get("TRIPATCH_THREADS", "1")
        try:
            n = int(raw)
        except ValueError:
            raise InputError(f"TRIPATCH_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise InputError(f"thread count must be >= 1, got {n}")
    return n


def read_depth(path, depth_scale: float = DEFAULT_DEPTH_SCALE) -> DepthMap:
    """16-bit PNG/PGM scaled to meters, or a float ``.npy`` array in meters."""
    if str(path).endswith(".npy"):
        return DepthMap(_load_npy(path))
    return load_depth(path, depth_scale)


def write_depth(depth: DepthMap, path, depth_scale: float = DEFAULT_DEPTH_SCALE) -> None:
    if str(path).endswith(".npy"):
        np.save(path, depth.data)
    else:
        save_depth(depth, path, depth_scale)


def read_normals(path) -> NormalMap:
    if str(path).endswith(".npy"):
        return NormalMap(_load_npy(path))
    return load_normals(path)


def _load_npy(path) -> np.ndarray:
    try:
        return np.load(path, allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _mesh_config(args) -> MeshConfig:
    return MeshConfig(args.canny_sigma, args.canny_low, args.canny_high, args.simplify_eps, args.snap_eps)


def _load_cloud(path) -> PatchCloud:
    return PatchCloud.from_dict(jsonio.load(path))


def cmd_mesh(args) -> int:
    img = load_image(args.image)
    mesh = extract_mesh(img, _mesh_config(args))
    jsonio.dump(mesh.to_dict(), args.out)
    print(f"vertices: {len(mesh.vertices)}")
    print(f"faces: {mesh.n_faces}")
    return 0


def cmd_fit(args) -> int:
    threads = _threads(args)
    K = load_intrinsics(args.intrinsics)
    Dstar = read_depth(args.depth, args.depth_scale)
    if args.mesh:
        mesh = Mesh2D.from_dict(jsonio.load(args.mesh))
    elif args.image:
        img = load_image(args.image)
        if (img.width, img.height) != (Dstar.width, Dstar.height):
            raise InputError(f"image is {img.width}x{img.height} but depth is {Dstar.width}x{Dstar.height}")
        mesh = extract_mesh(img, _mesh_config(args))
    else:
        raise InputError("fit needs --image or --mesh")
    if (mesh.width, mesh.height) != (Dstar.width, Dstar.height):
        raise InputError(f"mesh is {mesh.width}x{mesh.height} but depth is {Dstar.width}x{Dstar.height}")
    cfg = FitConfig(args.lambda_n, args.iterations, args.step_size, args.depth_term, args.init_depth)
    if cfg.lambda_n == 0:
        Nstar = None
    elif args.normals:
        Nstar = read_normals(args.normals)
    else:
        Nstar = normals_from_depth(Dstar, K)
    cloud, trace = fit(mesh, Dstar, Nstar, K, cfg, threads=threads)
    jsonio.dump(cloud.to_dict(), args.out)
    trace_path = args.trace or str(Path(args.out).with_suffix(".csv"))
    write_trace(trace, trace_path)
    ls, ld, ln = trace[-1]
    print(f"faces: {cloud.n_faces}")
    print(f"L_sum: {ls:.6g}")
    print(f"L_depth: {ld:.6g}")
    print(f"L_normal: {ln:.6g}")
    return 0


def cmd_render(args) -> int:
    cloud = _load_cloud(args.patches)
    depth, normals, _ = rasterize_patches(cloud, threads=_threads(args))
    if args.out_depth:
        write_depth(depth, args.out_depth, args.depth_scale)
    if args.out_normals:
        if str(args.out_normals).endswith(".npy"):
            np.save(args.out_normals, normals.data)
        else:
            save_normals(normals, args.out_normals)
    print(f"valid pixels: {depth.n_valid}")
    return 0


def cmd_baseline(args) -> int:
    K = load_intrinsics(args.intrinsics)
    depth = read_depth(args.depth, args.depth_scale)
    out, n_faces = run_baseline(depth, K, args.faces, dump_obj=args.dump_obj, threads=_threads(args))
    write_depth(out, args.out, args.depth_scale)
    print(f"faces: {n_faces}")
    return 0


def cmd_eval(args) -> int:
    pred = read_depth(args.pred, args.depth_scale)
    gt = read_depth(args.gt, args.depth_scale)
    report = evaluate(pred, gt)
    if args.patches:
        cloud = _load_cloud(args.patches)
        report = type(report)(**{**report.to_dict(), "n_params": param_count("patchcloud", cloud.n_faces)})
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(report.to_json())
    print("rel | rms | log10 | d1 | d2 | d3")
    print(report.row())
    return 0


def cmd_export(args) -> int:
    cloud = _load_cloud(args.patches)
    export_obj(cloud, args.out)
    print(f"vertices: {3 * cloud.n_faces}")
    print(f"faces: {cloud.n_faces}")
    return 0


def _add_mesh_flags(p):
    d = MeshConfig()
    p.add_argument("--canny-sigma", type=float, default=d.canny_sigma)
    p.add_argument("--canny-low", type=float, default=d.canny_low)
    p.add_argument("--canny-high", type=float, default=d.canny_high)
    p.add_argument("--simplify-eps", type=float, default=d.simplify_eps)
    p.add_argument("--snap-eps", type=float, default=d.snap_eps)


def _add_common(p, depth=False):
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: $TRIPATCH_THREADS or 1)")
    if depth:
        p.add_argument("--depth-scale", type=float, default=DEFAULT_DEPTH_SCALE, help="meters per 16-bit depth unit")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tripatch", description="Triangular patch-cloud depth toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="extract an edge-adaptive 2D mesh from an image")
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    _add_mesh_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("fit", help="fit patch planes to ground-truth depth")
    p.add_argument("--image")
    p.add_argument("--mesh", help="reuse a mesh JSON instead of extracting one from --image")
    p.add_argument("--depth", required=True)
    p.add_argument("--normals", help="GT normal map (PNG or .npy); derived from depth when omitted")
    p.add_argument("--intrinsics", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--trace", help="loss trace CSV (default: --out with .csv suffix)")
    f = FitConfig()
    p.add_argument("--lambda-n", type=float, default=f.lambda_n)
    p.add_argument("--iterations", type=int, default=f.iterations)
    p.add_argument("--step-size", type=float, default=f.step_size)
    p.add_argument("--depth-term", choices=DEPTH_TERMS, default=f.depth_term)
    p.add_argument("--init-depth", type=float, default=f.init_depth)
    _add_mesh_flags(p)
    _add_common(p, depth=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("render", help="render depth and normals of a patch cloud")
    p.add_argument("--patches", required=True)
    p.add_argument("--out-depth")
    p.add_argument("--out-normals")
    _add_common(p, depth=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("baseline", help="decimated dense-mesh baseline")
    p.add_argument("--depth", required=True)
    p.add_argument("--intrinsics", required=True)
    p.add_argument("--faces", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-obj", help="write the decimated mesh as OBJ")
    _add_common(p, depth=True)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("eval", help="depth metrics of a prediction against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out")
    p.add_argument("--patches", help="patch cloud JSON used to fill n_params")
    _add_common(p, depth=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export", help="write a patch cloud as Wavefront OBJ")
    p.add_argument("--patches", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except InvariantError as exc:
        print(f"tripatch: internal error: {exc}", file=sys.stderr)
        return 2
    except (InputError, OSError) as exc:
        print(f"tripatch: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
