"""Grow a center-unstable disk and tabulate volume, visibility and spans.

Example: python3 scripts/disk_balloon.py --system cat3u2 --steps 8 --r0 1e-4
"""
import argparse
import os

import numpy as np

from domlab import diskgrowth as dg
from domlab import rng
from domlab.splitting import estimate_splitting
from domlab.system import build_system


def main(argv=None):
    ap = argparse.ArgumentParser(description="disk balloon experiment")
    ap.add_argument("--system", default="cat2")
    ap.add_argument("--steps", type=int, default=12)
    ap.add_argument("--r0", type=float, default=0.01)
    ap.add_argument("--delta", type=float, default=0.05)
    ap.add_argument("--h", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--spans", type=int, default=200, help="span samples per generation")
    ap.add_argument("--out", default="out/balloon")
    args = ap.parse_args(argv)

    f = build_system(args.system)
    x = rng.uniform_points(args.seed, "scripts.balloon", 1, f.dim)[0]
    frame = estimate_splitting(f, x)
    seed = dg.seed_disk(f, frame, args.r0)
    rows, disks = dg.grow(f, seed, args.steps, delta=args.delta, h=args.h,
                          span_samples=args.spans, seed=args.seed, keep_disks=True,
                          sag_ratio=1.0 if f.dim_cu == 2 else None)

    os.makedirs(args.out, exist_ok=True)
    dg.write_series_csv(rows, os.path.join(args.out, f"{args.system}_series.csv"))
    dg.write_mesh(disks[-1], os.path.join(args.out, f"{args.system}_final.mesh"))

    print(f"{'n':>3} {'vertices':>9} {'log vol':>9} {'good':>8} {'median span':>12}")
    for r in rows:
        print(f"{r.n:3d} {r.n_vertices:9d} {np.log(r.volume):9.3f} "
              f"{r.good_fraction:8.5f} {r.span_q50:12.4g}")


if __name__ == "__main__":
    main()
