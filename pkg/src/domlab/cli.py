"""Command-line entry point.

    domlab <command> [--config PATH] [--seed N] [--out DIR] [--threads N] [--system ID]

Each command writes ``<command>.json`` (plus CSV / mesh side files) into the
output directory.  Exit codes: 0 success, 2 validation error, 3 numerical
error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__, diskgrowth, hopf, inflatability, lyapunov, productstructure, rng
from .config import RunConfig, load_config
from .errors import ConfigError, NumericalError, ValidationError
from .parallel import set_threads
from .splitting import estimate_frames, estimate_splitting, fit_domination
from .system import build_system

SCHEMA_VERSION = 1
COMMANDS = ("analyze", "lyapunov", "inflatability", "disk-grow", "hopf",
            "product-structure", "sweep", "report")
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    return obj


def dumps_report(report) -> str:
    return json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"


# --------------------------------------------------------------------------
# result blocks


def _system(cfg):
    return build_system(cfg.system.id, **cfg.system.params)


def splitting_block(cfg, fmap):
    s = cfg.splitting
    X = rng.uniform_points(cfg.seed, "cli.splitting", s.points, fmap.dim)
    fb = estimate_frames(fmap, X, burn_in=s.burn_in, iters=s.iters, seed=cfg.seed)
    ok = fb.residual <= s.tol
    block = {"points": s.points, "converged": int(ok.sum()),
             "max_residual": float(fb.residual.max()), "tolerance": s.tol,
             "min_angle": float(fb.angle.min())}
    if ok.sum() >= 1:
        dom = fit_domination(fmap, fb[np.flatnonzero(ok)], s.domination_horizon, tol=s.tol)
        block["domination"] = {"tau": dom.tau, "C": dom.C, "fit_rms": dom.residual,
                               "dominated": dom.dominated, "horizon": dom.horizon}
    return block, {"dominated": bool(block.get("domination", {}).get("dominated", False))}


def lyapunov_block(cfg, fmap, outdir):
    s = cfg.lyapunov
    X = rng.uniform_points(cfg.seed, "cli.lyapunov", s.points, fmap.dim)
    lcs, lcu, scs, scu = lyapunov.exponent_arrays(fmap, X, fmap.dim_cs, s.horizon)
    ests = [lyapunov.LyapunovEstimate(X[i], s.horizon, float(lcs[i]), float(lcu[i]), scs[i], scu[i])
            for i in range(len(X))]
    _, frac = lyapunov.classify_hyperbolic(ests, s.margin_threshold)
    spectra = np.concatenate([scu, scs], axis=1)
    with open(os.path.join(outdir, "lyapunov.csv"), "w") as fh:
        d = fmap.dim
        fh.write(",".join([f"x{i + 1}" for i in range(d)] + ["lambda_cs", "lambda_cu"]
                          + [f"chi{i + 1}" for i in range(d)]) + "\n")
        for i in range(len(X)):
            fh.write(",".join(repr(float(v)) for v in
                              np.concatenate([X[i], [lcs[i], lcu[i]], spectra[i]])) + "\n")
    n = len(X)
    block = {
        "horizon": s.horizon, "points": n,
        "lambda_cs_mean": float(lcs.mean()),
        "lambda_cs_stderr": float(lcs.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0,
        "lambda_cu_mean": float(lcu.mean()),
        "lambda_cu_stderr": float(lcu.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0,
        "spectrum_mean": spectra.mean(axis=0),
        "exponent_sum_mean": float(spectra.sum(axis=1).mean()),
        "hyperbolic_fraction": float(frac), "margin_threshold": s.margin_threshold,
    }
    return block, {"hyperbolic_fraction": float(frac)}


def inflatability_block(cfg, fmap):
    s = cfg.inflatability
    block, verdicts = {}, {}
    for side in s.sides:
        r = inflatability.check_inflatable(fmap, side, s.horizon, s.samples, s.grid, cfg.seed)
        block[side] = r.to_dict()
        verdicts[f"{side}_inflatable"] = r.inflatable
    if set(s.sides) == {"cu", "cs"}:
        verdicts["bi_inflatable"] = verdicts["cu_inflatable"] and verdicts["cs_inflatable"]
    return block, verdicts


def hopf_block(cfg, fmap, outdir):
    s = cfg.hopf
    bank = hopf.default_bank(fmap.dim)
    X = rng.uniform_points(cfg.seed, "cli.hopf", s.points, fmap.dim)
    profs = hopf.profiles(fmap, X, bank, s.horizon)
    cl = hopf.cluster_components(profs, s.radius)
    hopf.write_profiles_csv(profs, bank, os.path.join(outdir, "hopf_profiles.csv"), cl.assignment)
    pairs = []
    base = rng.uniform_points(cfg.seed, "cli.hopf.pairs", s.pair_points, fmap.dim)
    for i, x in enumerate(base):
        fr = estimate_splitting(fmap, x, seed=cfg.seed, strict=False)
        if fr.convergence_residual > cfg.splitting.tol:
            continue
        for y in hopf.stable_candidates(fmap, x, fr, s.pairs_per_point, s.t_scale,
                                        s.horizon_conv, seed=cfg.seed + i):
            pairs.append((x, y))
    tr = hopf.stable_transfer_check(fmap, pairs, bank, s.horizon, s.horizon_conv, s.tolerance)
    if tr.pairs:
        hopf.write_pairs_csv(tr, os.path.join(outdir, "hopf_pairs.csv"))
    block = {"clustering": cl.to_dict(), "horizon": s.horizon, "bank": list(bank.names),
             "monte_carlo_scale": 1.0 / np.sqrt(s.horizon),
             "transfer": {"pairs": len(tr.pairs), "converging": tr.converging,
                          "not_converging": tr.not_converging, "passed": tr.passed,
                          "pass_rate": tr.pass_rate, "tolerance": tr.tolerance,
                          "max_gap": max((r.gap for r in tr.pairs if r.converging), default=0.0)}}
    return block, {"components": cl.count, "transfer_pass_rate": tr.pass_rate}


def diskgrowth_block(cfg, fmap, outdir):
    s = cfg.diskgrowth
    if s.basepoint is not None:
        if len(s.basepoint) != fmap.dim:
            raise ConfigError(f"diskgrowth.basepoint: expected {fmap.dim} coordinates")
        x = np.asarray(s.basepoint, dtype=float)
    else:
        x = rng.uniform_points(cfg.seed, "cli.diskgrowth", 1, fmap.dim)[0]
    fr = estimate_splitting(fmap, x, seed=cfg.seed, tol=cfg.splitting.tol)
    seed = diskgrowth.seed_disk(fmap, fr, s.r0, s.resolution)
    rows, disks = diskgrowth.grow(fmap, seed, s.steps, s.delta, s.h, s.h_max, s.max_vertices,
                                  s.span_samples, cfg.seed, s.chart_cap, keep_disks=True)
    diskgrowth.write_series_csv(rows, os.path.join(outdir, "diskgrowth_series.csv"))
    diskgrowth.write_mesh(disks[-1], os.path.join(outdir, "diskgrowth_final.mesh"))
    last = rows[-1]
    cheb_ok = all(r.chebyshev_ok for r in rows)
    block = {
        "k": seed.k, "basepoint": x, "r0": s.r0, "steps": s.steps, "delta": s.delta, "h": s.h,
        "h_max": s.h_max, "chart_cap": s.chart_cap,
        "edge_length_range": disks[-1].edge_length_range,
        "final": {"volume": last.volume, "boundary_measure": last.boundary_measure,
                  "good_fraction": last.good_fraction, "chebyshev_bound": last.chebyshev_bound,
                  "span_median": last.span_q50, "span_resolution": s.chart_cap / 2**12,
                  "vertices": last.n_vertices},
        "chebyshev_ok": cheb_ok,
        "note": "seed radius r0 is a fixed parameter; no Pesin size function is computed",
    }
    return block, {"good_fraction": last.good_fraction, "chebyshev_ok": cheb_ok}


def productstructure_block(cfg, fmap):
    s = cfg.productstructure
    cert = productstructure.fit_constant_cones(fmap, s.grid, s.safety_margin, cfg.seed)
    block = {"certificate": cert.to_dict(),
             "scope": "chart-local: flat disks at separation within one chart"}
    verdicts = {"certificate_valid": cert.valid}
    if s.separation is not None or cert.valid:
        st = productstructure.disk_intersection_test(fmap, s.K_span, s.trials, cfg.seed,
                                                     s.separation, cert)
        block["intersection"] = st.to_dict()
        verdicts["hit_rate"] = st.hit_rate
    return block, verdicts


def sweep_block(cfg):
    s = cfg.sweep
    res = inflatability.perturbation_sweep(s.family, s.values, s.side, s.horizon, s.samples,
                                           s.grid, cfg.seed, s.parameter)
    rows = [{"value": float(e), "margin": r.margin, "stderr": r.stderr, "inflatable": r.inflatable}
            for e, r in zip(res.epsilons, res.reports)]
    block = {"family": s.family, "parameter": s.parameter, "rows": rows,
             "largest_positive": res.largest_positive, "margin_lipschitz": res.lipschitz}
    return block, {"largest_positive": res.largest_positive}


# --------------------------------------------------------------------------
# commands


def _report(cfg, command, results, verdicts, started):
    return {
        "schema_version": SCHEMA_VERSION,
        "artifact_version": __version__,
        "generator": rng.GENERATOR_NAME,
        "command": command,
        "config": cfg.echo(),
        "wall_clock_seconds": time.perf_counter() - started,
        "results": results,
        "verdicts": verdicts,
    }


def run(command, cfg: RunConfig):
    """Execute ``command``; returns the report dict (also written to disk)."""
    if command not in COMMANDS:
        raise ValidationError(f"unknown command {command!r}")
    if command == "report":
        return summarize(cfg.out)
    started = time.perf_counter()
    os.makedirs(cfg.out, exist_ok=True)
    set_threads(cfg.threads)
    results, verdicts = {}, {}

    def add(name, pair):
        results[name], v = pair
        verdicts.update(v)

    if command == "sweep":
        add("sweep", sweep_block(cfg))
    else:
        fmap = _system(cfg)
        if command == "analyze":
            add("splitting", splitting_block(cfg, fmap))
            add("lyapunov", lyapunov_block(cfg, fmap, cfg.out))
            add("inflatability", inflatability_block(cfg, fmap))
            add("hopf", hopf_block(cfg, fmap, cfg.out))
        elif command == "lyapunov":
            add("lyapunov", lyapunov_block(cfg, fmap, cfg.out))
        elif command == "inflatability":
            add("inflatability", inflatability_block(cfg, fmap))
        elif command == "disk-grow":
            add("diskgrowth", diskgrowth_block(cfg, fmap, cfg.out))
        elif command == "hopf":
            add("hopf", hopf_block(cfg, fmap, cfg.out))
        elif command == "product-structure":
            add("productstructure", productstructure_block(cfg, fmap))
    report = _report(cfg, command, results, verdicts, started)
    with open(os.path.join(cfg.out, f"{command}.json"), "w") as fh:
        fh.write(dumps_report(report))
    return report


def summarize(outdir):
    """Collect the verdicts of every report in ``outdir`` into summary.json."""
    if not os.path.isdir(outdir):
        raise ValidationError(f"output directory {outdir!r} does not exist")
    summary = {"schema_version": SCHEMA_VERSION, "artifact_version": __version__, "reports": {}}
    for name in sorted(os.listdir(outdir)):
        if not name.endswith(".json") or name == "summary.json":
            continue
        with open(os.path.join(outdir, name)) as fh:
            try:
                rep = json.load(fh)
            except json.JSONDecodeError:
                continue
        if rep.get("schema_version") != SCHEMA_VERSION:
            continue
        summary["reports"][rep["command"]] = {"system": rep["config"]["system"],
                                              "verdicts": rep["verdicts"]}
    with open(os.path.join(outdir, "summary.json"), "w") as fh:
        fh.write(dumps_report(summary))
    return summary


def build_parser():
    p = argparse.ArgumentParser(prog="domlab", description=__doc__.split("\n")[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--seed", type=int, help="unsigned 64-bit seed (overrides config)")
    p.add_argument("--out", help="output directory (overrides config)")
    p.add_argument("--threads", type=int, help="worker threads (fallback: DOMLAB_THREADS)")
    p.add_argument("--system", help="catalog identifier (overrides config)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.out = args.out
        if args.threads is not None:
            cfg.threads = args.threads
        if args.system is not None:
            cfg.system.id = args.system
            cfg.system.params = {}
        cfg.validate()
        report = run(args.command, cfg)
    except ValidationError as exc:
        print(f"domlab: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"domlab: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(json.dumps(_jsonable(report.get("verdicts", {})), sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
