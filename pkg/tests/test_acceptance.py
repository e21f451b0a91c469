"""Acceptance criteria, each at its stated tolerance.

Every criterion is a function returning ``(passed, detail)``.  Under pytest
each one is a test and its one-line verdict is printed in the terminal
summary; run this file directly to print the verdicts without pytest.
"""
import json
import os
import sys
import tempfile
import time

import numpy as np
import pytest

from domlab import diskgrowth as dg
from domlab import rng
from domlab.cli import run
from domlab.config import RunConfig
from domlab.hopf import cluster_components, profiles, stable_candidates, stable_transfer_check
from domlab.inflatability import Xi_series, check_inflatable, perturbation_sweep, subadditivity_table
from domlab.lyapunov import classify_hyperbolic, exponent_arrays, finite_time_exponents
from domlab.productstructure import disk_intersection_test, fit_constant_cones
from domlab.splitting import estimate_frames, estimate_splitting, fit_domination
from domlab.system import CAT3_U2, build_system, catalog

LAMBDA = float(np.log((3 + np.sqrt(5)) / 2))
TAU = (3 - np.sqrt(5)) / (3 + np.sqrt(5))
MU = np.sort(np.abs(np.linalg.eigvals(CAT3_U2.astype(float))))[::-1]

RESULTS = {}


def timed(fn, *args, **kw):
    t = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t


# ---------------------------------------------------------------------------


def criterion_1():
    f = build_system("cat2")
    x = rng.uniform_points(0, "acceptance.1", 1, 2)
    (lcs, lcu, _, _), secs = timed(exponent_arrays, f, x, 1, 1000)
    err = max(abs(lcu[0] - LAMBDA), abs(lcs[0] + LAMBDA))
    return err <= 1e-6 and secs < 1.0, f"max error {err:.2e}, {secs:.3f} s"


def criterion_2():
    f = build_system("cat2")
    X = rng.uniform_points(0, "acceptance.2", 32, 2)

    def fit():
        return fit_domination(f, estimate_frames(f, X), 10)

    est, secs = timed(fit)
    err = abs(est.tau - TAU)
    return err <= 1e-3 and secs < 5.0, f"tau {est.tau:.10f} (error {err:.2e}), {secs:.2f} s"


def criterion_3():
    f = build_system("cat2")
    r, secs = timed(check_inflatable, f, "cu", 10, 10_000, seed=0)
    err = abs(r.lhs / 10 - LAMBDA)
    ok = r.rhs == 0.0 and err <= 1e-6 and r.inflatable and secs < 10.0
    return ok, f"rhs {r.rhs!r}, lhs/n error {err:.2e}, inflatable {r.inflatable}, {secs:.2f} s"


def criterion_4():
    f = build_system("cat3u2")
    n = 10
    r = check_inflatable(f, "cu", n, 10_000, seed=0)
    errs = (abs(r.lhs / n - np.log(MU[0] * MU[1])), abs(r.rhs / n - np.log(MU[0])),
            abs(r.margin / n - np.log(MU[1])))
    return max(errs) <= 1e-6, "lhs/rhs/margin errors " + ", ".join(f"{e:.1e}" for e in errs)


def criterion_5():
    f = build_system("cat2xid")
    r = check_inflatable(f, "cs", 10, 10_000, seed=0)
    X = rng.uniform_points(0, "acceptance.5", 200, 3)
    ests = finite_time_exponents(f, estimate_frames(f, X), 10_000)
    _, frac = classify_hyperbolic(ests, 0.05)
    ok = abs(r.margin) <= 2 * r.stderr and not r.inflatable and frac == 0.0
    return ok, f"|margin| {abs(r.margin):.2e} vs 2 SE {2 * r.stderr:.2e}, hyperbolic fraction {frac}"


def _fubini_disks():
    """10 polylines and 10 meshes: flat, and iterated under several maps."""
    disks = []
    e1 = np.array([[1.0], [0.0]])
    for L in (0.3, 1.0, 2.5):
        disks.append(dg.flat_disk(np.zeros(2), e1, L / 2, L / 200))
    for ident, steps, r0 in (("cat2", 6, 0.01), ("cat2", 12, 0.01), ("cat2shear", 10, 0.005),
                             ("cat2conj", 8, 0.01), ("cat3", 6, 0.005), ("cat3shear", 7, 0.005),
                             ("cat2xid", 9, 0.01)):
        f = build_system(ident)
        fr = estimate_splitting(f, rng.uniform_points(6, "acceptance.6", 1, f.dim)[0])
        disks.append(dg.iterate_disk(f, dg.seed_disk(f, fr, r0), steps))
    plane = np.eye(3)[:, :2]
    for r, res in ((0.3, 0.02), (1.0, 0.05), (0.05, 0.002)):
        disks.append(dg.flat_disk(np.zeros(3), plane, r, res))
    for ident, steps, r0, res in (("cat3u2", 3, 0.01, 0.002), ("cat3u2", 5, 0.01, 0.002),
                                  ("cat2xcat2", 3, 0.01, 0.002), ("cat2xcat2", 5, 0.005, 0.001),
                                  ("cat3u2shear", 3, 0.01, 0.002), ("cat3u2shear", 5, 0.01, 0.002),
                                  ("cat3u2shear", 8, 1e-4, 2e-5)):
        f = build_system(ident)
        fr = estimate_splitting(f, rng.uniform_points(6, "acceptance.6", 1, f.dim)[0])
        disks.append(dg.iterate_disk(f, dg.seed_disk(f, fr, r0, res), steps, sag_ratio=1.0))
    return disks


def criterion_6():
    delta = 0.05
    disks = _fubini_disks()
    worst_gap, worst_secs, violations, biggest = 0.0, 0.0, 0, 0
    for D in disks:
        res, secs = timed(dg.fubini_check, D, delta)
        worst_gap = max(worst_gap, res.relative_gap)
        worst_secs = max(worst_secs, secs)
        biggest = max(biggest, D.n_vertices)
        # the bound is attained on polylines; allow summation round-off only
        slack = D.n_vertices * np.finfo(float).eps
        violations += res.lhs > res.rhs_bound * (1 + slack)
    kinds = (sum(D.k == 1 for D in disks), sum(D.k == 2 for D in disks))
    ok = kinds == (10, 10) and worst_gap <= 1e-3 and violations == 0 and worst_secs < 2.0 \
        and biggest <= 10**5
    return ok, (f"{kinds[0]} polylines + {kinds[1]} meshes, worst relative gap {worst_gap:.1e}, "
                f"{violations} bound violations, slowest {worst_secs:.2f} s, max {biggest} vertices")


def _boundary_run(ident, N=20):
    f = build_system(ident)
    k = f.dim_cu
    rate = check_inflatable(f, "cu", 1, 1000).lhs
    x = rng.uniform_points(7, "acceptance.7", 1, f.dim)[0]
    fr = estimate_splitting(f, x)
    xi = Xi_series(f, range(1, N + 1))
    # keep the final disk about unit length so the mesh stays small
    stretch = N * rate if k == 1 else xi[N].value
    r0 = min(0.01, 0.3 * np.exp(-stretch))
    rows = dg.grow(f, dg.seed_disk(f, fr, r0), N, span_samples=10,
                   sag_ratio=1.0 if k == 2 else None)
    b0 = np.log(rows[0].boundary_measure)
    excess = max(np.log(r.boundary_measure) - b0 - xi[r.n].value for r in rows[1:])
    cheb = all(r.chebyshev_ok for r in rows)
    return excess, cheb


def criterion_7():
    maps = [e.identifier for e in catalog()
            if e.facts.get("dominated") and e.construct().dim_cu <= 2]
    lines, ok = [], True
    for ident in maps:
        excess, cheb = _boundary_run(ident)
        ok &= excess <= 1e-2 and cheb
        lines.append(f"{ident} {excess:+.1e}{'' if cheb else ' (chebyshev!)'}")
    return ok, "worst log-excess over Xi_n: " + ", ".join(lines)


def criterion_8():
    f = build_system("cat2")

    def balloon():
        fr = estimate_splitting(f, rng.uniform_points(8, "acceptance.8", 1, 2)[0])
        return dg.grow(f, dg.seed_disk(f, fr, 0.01), 12, delta=0.05, h=0.5, span_samples=500)

    rows, secs = timed(balloon)
    last = rows[-1]
    ok = last.good_fraction >= 0.99 and last.span_q50 >= dg.CHART_CAP and secs < 60
    return ok, (f"good fraction {last.good_fraction:.5f}, median span {last.span_q50} "
                f"(cap {dg.CHART_CAP}), {secs:.2f} s")


def criterion_9():
    lines, ok = [], True
    for ident in ("cat3u2", "cat2xcat2", "cat3u2shear"):
        _, worst, tol = subadditivity_table(build_system(ident), "cu", 5)
        ok &= worst <= tol
        lines.append(f"{ident} {worst:+.1e} <= {tol:.1e}")
    return ok, "worst Xi_(n+m) - Xi_n - Xi_m vs tolerance: " + ", ".join(lines)


def criterion_10():
    counts = []
    cat = build_system("cat2")
    for seed in (0, 1, 2):
        X = rng.uniform_points(seed, "acceptance.10", 500, 2)
        counts.append(cluster_components(profiles(cat, X, n=10**5), 0.1).count)
    prod = build_system("cat2xid")
    X = rng.uniform_points(0, "acceptance.10", 500, 3)
    prod_count = cluster_components(profiles(prod, X, n=10**5), 0.1).count
    pairs_ok, detail = True, []
    for ident in ("cat2", "cat2shear"):
        f = build_system(ident)
        pairs = []
        for i, x in enumerate(rng.uniform_points(10, "acceptance.10.pairs", 4, 2)):
            fr = estimate_splitting(f, x)
            pairs += [(x, y) for y in stable_candidates(f, x, fr, 4, 1e-3, seed=i)]
        s = stable_transfer_check(f, pairs, n=10**5)
        pairs_ok &= s.converging > 0 and s.pass_rate == 1.0
        worst = max(p.gap for p in s.pairs if p.converging)
        detail.append(f"{ident} {s.passed}/{s.converging} (max gap {worst:.1e})")
    ok = counts == [1, 1, 1] and prod_count >= 10 and pairs_ok
    return ok, (f"cat clusters {counts}, product clusters {prod_count}, transfer "
                + ", ".join(detail))


def criterion_11():
    lines, ok = [], True
    for ident in ("cat2", "cat3", "cat3u2", "cat2xcat2", "cat2xid"):
        f = build_system(ident)
        cert = fit_constant_cones(f)
        dev = max(cert.cs.max_deviation, cert.cu.max_deviation)
        st = disk_intersection_test(f, 0.4, 1000, seed=11, certificate=cert)
        ok &= cert.valid and dev <= 1e-9 and st.hit_rate == 1.0
        lines.append(f"{ident} dev {dev:.0e} hit {st.hit_rate}")
    return ok, ", ".join(lines)


def criterion_12():
    eps = np.linspace(0.0, 0.02, 9)
    res = perturbation_sweep("cat2shear", eps, "cu", 10, 2000)
    verdicts = {r.inflatable for r in res.reports}
    margins = np.array([r.margin for r in res.reports])
    spread = float(margins.max() - margins.min())
    ok = verdicts == {True} and spread <= 0.1
    return ok, f"verdicts {sorted(verdicts)}, margin spread {spread:.4f}, L {res.lipschitz:.3f}"


def _strip_clock(text):
    return "\n".join(ln for ln in text.splitlines() if '"wall_clock_seconds"' not in ln)


def criterion_13():
    base = {
        "system": {"id": "cat2shear"}, "seed": 2024,
        "splitting": {"points": 16, "domination_horizon": 6},
        "lyapunov": {"horizon": 200, "points": 32},
        "inflatability": {"horizon": 5, "samples": 1000, "grid": 8},
        "hopf": {"points": 20, "horizon": 2000, "pair_points": 2, "pairs_per_point": 3},
        "diskgrowth": {"steps": 6, "span_samples": 50},
        "productstructure": {"grid": 8, "trials": 200},
        "sweep": {"values": [0.0, 0.01], "horizon": 4, "samples": 500},
    }
    commands = ("analyze", "disk-grow", "product-structure", "sweep")
    outputs = []
    with tempfile.TemporaryDirectory() as tmp:
        for label, threads in (("a", 1), ("b", 1), ("c", 3)):
            out = os.path.join(tmp, label)
            cfg = RunConfig.from_dict({**json.loads(json.dumps(base)), "out": out,
                                       "threads": threads})
            for c in commands:
                run(c, cfg)
            files = {}
            for name in sorted(os.listdir(out)):
                with open(os.path.join(out, name)) as fh:
                    text = fh.read()
                files[name] = _strip_clock(text) if name.endswith(".json") else text
            outputs.append(files)
    same = outputs[0] == outputs[1] == outputs[2]
    return same, f"{len(outputs[0])} files identical across 3 runs (threads 1, 1, 3): {same}"


CRITERIA = [
    (1, "Lyapunov oracle", criterion_1),
    (2, "domination fit", criterion_2),
    (3, "inflatability cu = 1 collapse", criterion_3),
    (4, "inflatability cu = 2", criterion_4),
    (5, "negative control", criterion_5),
    (6, "Fubini identity", criterion_6),
    (7, "boundary-growth bound", criterion_7),
    (8, "balloon behaviour", criterion_8),
    (9, "sub-additivity", criterion_9),
    (10, "Hopf probe", criterion_10),
    (11, "product structure", criterion_11),
    (12, "openness sweep", criterion_12),
    (13, "determinism", criterion_13),
]


def verdict_line(number, title, passed, detail):
    return f"[{'PASS' if passed else 'FAIL'}] {number:2d} {title}: {detail}"


@pytest.mark.parametrize("number,title,fn", CRITERIA, ids=[f"c{n:02d}" for n, _, _ in CRITERIA])
def test_criterion(number, title, fn):
    passed, detail = fn()
    RESULTS[number] = verdict_line(number, title, passed, detail)
    assert passed, RESULTS[number]


if __name__ == "__main__":
    failed = 0
    for number, title, fn in CRITERIA:
        passed, detail = fn()
        failed += not passed
        print(verdict_line(number, title, passed, detail), flush=True)
    sys.exit(1 if failed else 0)
