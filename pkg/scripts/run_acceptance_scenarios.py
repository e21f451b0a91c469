"""Run the acceptance criteria outside pytest and save the verdicts.

    python3 scripts/run_acceptance_scenarios.py --only 1 2 3 --json out/acceptance.json
"""
import argparse
import json
import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "tests"))

import test_acceptance as acc  # noqa: E402


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--only", type=int, nargs="*", help="criterion numbers to run")
    ap.add_argument("--json", help="write verdicts to this file")
    args = ap.parse_args(argv)

    wanted = set(args.only or [n for n, _, _ in acc.CRITERIA])
    records = []
    for number, title, fn in acc.CRITERIA:
        if number not in wanted:
            continue
        t = time.perf_counter()
        passed, detail = fn()
        secs = time.perf_counter() - t
        print(acc.verdict_line(number, title, passed, detail), f"({secs:.1f} s)", flush=True)
        records.append({"criterion": number, "title": title, "passed": bool(passed),
                        "detail": detail, "seconds": round(secs, 3)})
    if args.json:
        os.makedirs(os.path.dirname(os.path.abspath(args.json)), exist_ok=True)
        with open(args.json, "w") as fh:
            json.dump(records, fh, indent=2)
    return 0 if all(r["passed"] for r in records) else 1


if __name__ == "__main__":
    sys.exit(main())
