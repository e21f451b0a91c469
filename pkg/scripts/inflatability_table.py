"""Inflatability of both sides for every dominated catalog map."""
import argparse

from domlab.inflatability import check_inflatable
from domlab.system import catalog


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--horizon", type=int, default=10)
    ap.add_argument("--samples", type=int, default=5000)
    args = ap.parse_args(argv)
    print(f"{'system':<12} {'side':<4} {'lhs/n':>9} {'rhs/n':>9} {'margin/n':>9}  verdict")
    for entry in catalog():
        if not entry.facts.get("dominated"):
            continue
        f = entry.construct()
        for side in ("cs", "cu"):
            r = check_inflatable(f, side, args.horizon, args.samples)
            n = args.horizon
            print(f"{entry.identifier:<12} {side:<4} {r.lhs / n:9.4f} {r.rhs / n:9.4f} "
                  f"{r.margin / n:9.4f}  {'inflatable' if r.inflatable else '-'}")


if __name__ == "__main__":
    main()
