"""Inflatability margin along a one-parameter family of perturbations.

Example: python3 scripts/sweep.py --family cat2shear --max-eps 0.05 --count 11
"""
import argparse
import csv
import os

import numpy as np

from domlab.inflatability import perturbation_sweep


def main(argv=None):
    ap = argparse.ArgumentParser(description="openness sweep")
    ap.add_argument("--family", default="cat2shear")
    ap.add_argument("--side", choices=("cs", "cu"), default="cu")
    ap.add_argument("--max-eps", type=float, default=0.05)
    ap.add_argument("--count", type=int, default=11)
    ap.add_argument("--horizon", type=int, default=10)
    ap.add_argument("--samples", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="out/sweep.csv")
    args = ap.parse_args(argv)

    eps = np.linspace(0.0, args.max_eps, args.count)
    res = perturbation_sweep(args.family, eps, args.side, args.horizon, args.samples,
                             seed=args.seed)
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eps", "lhs", "rhs", "margin", "stderr", "inflatable"])
        for e, r in zip(eps, res.reports):
            w.writerow([repr(float(e)), repr(r.lhs), repr(r.rhs), repr(r.margin),
                        repr(r.stderr), r.inflatable])
            print(f"eps {e:.4f}  margin {r.margin:+.5f}  inflatable {r.inflatable}")
    print(f"largest inflatable eps {res.largest_positive}, margin Lipschitz {res.lipschitz:.3f}")


if __name__ == "__main__":
    main()
