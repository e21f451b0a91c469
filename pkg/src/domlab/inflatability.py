"""Monte Carlo check of the cu-/cs-inflatability inequality.

For side ``cu`` at horizon n:

    lhs = E_m[ xi_n(x) ],      xi_n(x) = log |det Df^n|E^cu_x|
    rhs = Xi_n = log sup_x ||wedge^(cu-1) Df^n|E^cu_x||

and side ``cs`` is side ``cu`` of f^-1 (time reversal swaps the bundles).
The integral is a uniform i.i.d. average with its standard error; the sup
is a max over a uniform grid and the sample points.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import rng
from .errors import NoConvergence, ValidationError
from .splitting import (DEFAULT_TOL, FrameBatch, SplittingFrame, estimate_bundle,
                        transport_cu)
from .system import TorusMap, build_system

# relative size of the floating-point error bar folded into every standard error
NUMERICAL_REL_ERROR = 1e-12
MAX_SKIP_FRACTION = 0.01


@dataclass(frozen=True)
class InflatabilityReport:
    side: str
    horizon: int
    lhs: float
    stderr: float
    stderr_mc: float
    rhs: float
    margin: float
    samples: int
    grid_resolution: int
    grid_skipped: int
    grid_modulus: float
    inflatable: bool
    params: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class XiResult:
    value: float
    argmax: np.ndarray
    skipped: int
    total: int
    modulus: float


def _side_map(fmap: TorusMap, side: str):
    """(map, bundle dimension) whose centre-unstable bundle realises ``side``."""
    if side == "cu":
        return fmap, fmap.dim_cu
    if side == "cs":
        return fmap.inverse(), fmap.dim_cs
    raise ValidationError(f"side must be 'cu' or 'cs', got {side!r}")


def _bundle(frame, side):
    if isinstance(frame, SplittingFrame):
        Q = frame.cu_basis if side == "cu" else frame.cs_basis
        return frame.point[None, :], Q[None]
    if isinstance(frame, FrameBatch):
        return frame.points, frame.cu if side == "cu" else frame.cs
    raise ValidationError("frame must be a SplittingFrame or FrameBatch")


def xi_n(fmap: TorusMap, frame, n: int, side="cu"):
    """log|det Df^n|E^cu_x| (side cu) or log|det Df^-n|E^cs_x| (side cs)."""
    g, _ = _side_map(fmap, side)
    X, Q = _bundle(frame, side)
    if n == 0:
        vals = np.zeros(len(X))
    else:
        L, _ = transport_cu(g, X, Q, n)
        vals = L[:, -1]
    return float(vals[0]) if isinstance(frame, SplittingFrame) else vals


def grid_points(d: int, resolution: int):
    axes = [np.arange(resolution) / resolution] * d
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)


def default_grid_resolution(d: int):
    return {1: 256, 2: 64, 3: 24}.get(d, 12)


def _bundles(g, X, k, seed, tol):
    Q, res = estimate_bundle(g, X, k, seed=seed)
    return Q, res <= tol


def _transported(g, X, Q, ok, k, n):
    """log ||wedge^(k-1) Dg^n|E^cu|| and log|det| at rows of X; NaN where E^cu fails."""
    wedge = np.full(len(X), np.nan)
    det = np.full(len(X), np.nan)
    if n == 0:
        wedge[ok] = 0.0
        det[ok] = 0.0
    elif ok.any():
        L, _ = transport_cu(g, X[ok], Q[ok], n)
        wedge[ok] = L[:, k - 1]
        det[ok] = L[:, k]
    return wedge, det


def _wedge_values(g, X, k, n, seed, tol):
    Q, ok = _bundles(g, X, k, seed, tol)
    wedge, det = _transported(g, X, Q, ok, k, n)
    return wedge, det, ok


def _grid_max(G, wedge, res, d):
    """(max, argmax point, periodic-neighbour modulus) of grid values."""
    cube = wedge.reshape((res,) * d)
    modulus = 0.0
    for ax in range(d):
        diff = np.abs(cube - np.roll(cube, 1, axis=ax))
        if np.isfinite(diff).any():
            modulus = max(modulus, float(np.nanmax(diff)))
    best = int(np.nanargmax(wedge))
    return float(wedge[best]), G[best], modulus


def Xi_n(fmap: TorusMap, n: int, side="cu", grid_resolution=None, extra_points=None,
         seed=0, tol=DEFAULT_TOL) -> XiResult:
    """Grid (plus optional extra points) maximum of log ||wedge^(k-1) Df^n|E||."""
    return Xi_series(fmap, [n], side, grid_resolution, extra_points, seed, tol)[n]


def Xi_series(fmap: TorusMap, horizons, side="cu", grid_resolution=None, extra_points=None,
              seed=0, tol=DEFAULT_TOL):
    """``{n: XiResult}`` for several horizons, estimating the grid bundles once."""
    g, k = _side_map(fmap, side)
    d = fmap.dim
    res = grid_resolution or default_grid_resolution(d)
    G = grid_points(d, res)
    if k == 1:
        return {int(n): XiResult(0.0, G[0], 0, len(G), 0.0) for n in horizons}
    Q, ok = _bundles(g, G, k, seed, tol)
    skipped = int((~ok).sum())
    if skipped > MAX_SKIP_FRACTION * len(G):
        raise NoConvergence(f"splitting failed at {skipped}/{len(G)} grid points")
    if extra_points is not None and len(extra_points):
        E = np.atleast_2d(extra_points)
        QE, okE = _bundles(g, E, k, seed, tol)
    out = {}
    for n in horizons:
        wedge, _ = _transported(g, G, Q, ok, k, int(n))
        value, arg, modulus = _grid_max(G, wedge, res, d)
        if extra_points is not None and len(extra_points) and okE.any():
            w2, _ = _transported(g, E, QE, okE, k, int(n))
            if np.nanmax(w2) > value:
                j = int(np.nanargmax(w2))
                value, arg = float(w2[j]), E[j]
        out[int(n)] = XiResult(value, arg, skipped, len(G), modulus)
    return out


def check_inflatable(fmap: TorusMap, side="cu", n=10, samples=10_000, grid_resolution=None,
                     seed=0, tol=DEFAULT_TOL) -> InflatabilityReport:
    if samples < 100:
        raise ValidationError("samples must be >= 100")
    if n < 0:
        raise ValidationError("horizon must be >= 0")
    g, k = _side_map(fmap, side)
    X = rng.uniform_points(seed, f"inflatability.samples.{side}", samples, fmap.dim)
    wedge, det, ok = _wedge_values(g, X, k, n, seed, tol)
    if (~ok).sum() > MAX_SKIP_FRACTION * samples:
        raise NoConvergence(f"splitting failed at {(~ok).sum()}/{samples} sample points")
    det = det[ok]
    lhs = float(det.mean())
    se_mc = float(det.std(ddof=1) / np.sqrt(len(det)))
    se = float(np.hypot(se_mc, NUMERICAL_REL_ERROR * max(1.0, abs(lhs))))

    res = grid_resolution or default_grid_resolution(fmap.dim)
    if k == 1:
        rhs, skipped, modulus = 0.0, 0, 0.0
    else:
        xi = Xi_n(fmap, n, side, res, seed=seed, tol=tol)
        rhs = max(xi.value, float(np.nanmax(wedge)))
        skipped, modulus = xi.skipped, xi.modulus
    margin = lhs - rhs
    return InflatabilityReport(side, n, lhs, se, se_mc, rhs, margin, int(ok.sum()), res,
                               skipped, modulus, bool(margin > 2 * se),
                               {"system": fmap.name, **fmap.params, "seed": seed})


def check_bi_inflatable(fmap: TorusMap, n_cs=10, n_cu=10, samples=10_000,
                        grid_resolution=None, seed=0):
    """Both sides; bi-inflatable iff both verdicts are positive."""
    rcs = check_inflatable(fmap, "cs", n_cs, samples, grid_resolution, seed)
    rcu = check_inflatable(fmap, "cu", n_cu, samples, grid_resolution, seed)
    return rcs, rcu, bool(rcs.inflatable and rcu.inflatable)


def scan_horizons(fmap: TorusMap, side, horizons, samples=10_000, grid_resolution=None, seed=0):
    """Reports for every horizon and the one with the largest margin."""
    reports = [check_inflatable(fmap, side, int(h), samples, grid_resolution, seed)
               for h in horizons]
    return reports, max(reports, key=lambda r: r.margin)


@dataclass(frozen=True)
class SweepResult:
    epsilons: np.ndarray
    reports: list
    largest_positive: float | None
    lipschitz: float


def perturbation_sweep(family: str, epsilons, side="cu", n=10, samples=10_000,
                       grid_resolution=None, seed=0, parameter="eps") -> SweepResult:
    """Re-run the inflatability check along a one-parameter catalog family.

    The same seed (hence the same sample points) is used for every member,
    so differences in margin reflect the map and not Monte Carlo noise.
    """
    eps = np.asarray(sorted(float(e) for e in epsilons))
    reports = [check_inflatable(build_system(family, **{parameter: float(e)}), side, n,
                                samples, grid_resolution, seed) for e in eps]
    margins = np.array([r.margin for r in reports])
    positive = [e for e, r in zip(eps, reports) if r.inflatable]
    lip = 0.0
    if len(eps) > 1:
        de = np.diff(eps)
        keep = de > 0
        if keep.any():
            lip = float(np.max(np.abs(np.diff(margins))[keep] / de[keep]))
    return SweepResult(eps, reports, float(max(positive)) if positive else None, lip)


def subadditivity_table(fmap: TorusMap, side="cu", nmax=5, grid_resolution=None, seed=0):
    """Xi_1..Xi_{2 nmax} and the worst violation of Xi_{n+m} <= Xi_n + Xi_m.

    Returns ``(xi, worst, tolerance)``.  A grid maximum can only underestimate
    the supremum, and by at most the grid modulus, so the tolerance is the
    largest sum of the moduli of Xi_a and Xi_b plus a round-off allowance.
    """
    xi = {0: XiResult(0.0, None, 0, 0, 0.0)}
    xi.update(Xi_series(fmap, range(1, 2 * nmax + 1), side, grid_resolution, seed=seed))
    worst, tol = -np.inf, 0.0
    for a in range(1, nmax + 1):
        for b in range(1, nmax + 1):
            worst = max(worst, xi[a + b].value - xi[a].value - xi[b].value)
            tol = max(tol, xi[a].modulus + xi[b].modulus)
    tol += 1e-9
    return {h: r.value for h, r in xi.items()}, float(worst), float(tol)
