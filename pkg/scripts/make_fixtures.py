"""Write the small synthetic fixtures used by the CLI tests into tests/data."""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from tripatch import jsonio
from tripatch.ingest import save_depth, save_image, save_normals
from tripatch.synthetic import demo_scenes


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "tests" / "data"))
    ap.add_argument("--size", type=int, default=64)
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, sc in demo_scenes(args.size).items():
        save_image(sc.image, out / f"{name}_image.png")
        save_depth(sc.depth, out / f"{name}_depth.png")
        save_normals(sc.normals, out / f"{name}_normals.png")
        np.save(out / f"{name}_depth.npy", sc.depth.data)
        jsonio.dump(sc.K.to_dict(), out / f"{name}_intrinsics.json")
        print(f"{name}: {sorted(p.name for p in out.glob(name + '_*'))}")


if __name__ == "__main__":
    main()
