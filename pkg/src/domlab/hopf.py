"""Hopf-style ergodicity probe.

Points are clustered by their forward/backward Birkhoff profiles over a bank
of continuous observables, and profiles are compared along pairs that are
numerically on the same stable set.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable

import numpy as np

from . import rng
from .errors import OrbitLengthExceeded, ValidationError
from .parallel import map_chunks
from .splitting import DEFAULT_TOL, SplittingFrame, estimate_frames
from .system import MAX_ORBIT_LENGTH, TWO_PI, TorusMap, torus_delta, torus_distance, wrap

MIN_HORIZON = 1000
DEFAULT_RADIUS = 0.1
DEFAULT_TRANSFER_TOL = 5e-2
DEFAULT_HORIZON_CONV = 15
# distances below this are at round-off level and excluded from rate fits
DISTANCE_FLOOR = 1e-12
CONVERGENCE_SLOPE = -1e-2
ORBIT_BLOCK = 256


@dataclass(frozen=True)
class ObservableBank:
    names: tuple
    functions: tuple = field(repr=False)
    fast: Callable | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if len(self.names) != len(self.functions):
            raise ValidationError("one name per observable")

    def __len__(self):
        return len(self.names)

    def evaluate(self, X):
        """(N, len(bank)) observable values at rows of X."""
        X = np.atleast_2d(X)
        if self.fast is not None:
            return self.fast(X)
        return np.stack([phi(X) for phi in self.functions], axis=1)


def default_bank(d: int) -> ObservableBank:
    """cos 2pi x_i, sin 2pi x_i, and cos 2pi(x_i + x_j) for i < j."""
    names, funcs = [], []
    for i in range(d):
        names.append(f"cos(2pi x{i + 1})")
        funcs.append(lambda X, i=i: np.cos(TWO_PI * X[:, i]))
    for i in range(d):
        names.append(f"sin(2pi x{i + 1})")
        funcs.append(lambda X, i=i: np.sin(TWO_PI * X[:, i]))
    pairs = list(combinations(range(d), 2))
    for i, j in pairs:
        names.append(f"cos(2pi(x{i + 1}+x{j + 1}))")
        funcs.append(lambda X, i=i, j=j: np.cos(TWO_PI * (X[:, i] + X[:, j])))
    I = np.array([p[0] for p in pairs], dtype=int)
    J = np.array([p[1] for p in pairs], dtype=int)

    def fast(X):
        C, S = np.cos(TWO_PI * X), np.sin(TWO_PI * X)
        return np.concatenate([C, S, C[:, I] * C[:, J] - S[:, I] * S[:, J]], axis=1)

    return ObservableBank(tuple(names), tuple(funcs), fast)


@dataclass(frozen=True)
class BirkhoffProfile:
    point: np.ndarray
    horizon: int
    forward: np.ndarray
    backward: np.ndarray

    @property
    def vector(self):
        return np.concatenate([self.forward, self.backward])


def _forward_sums(g: TorusMap, X, bank, n, block=ORBIT_BLOCK):
    # orbit segments are buffered so the bank is evaluated on large arrays;
    # sums are taken relative to the first value, which makes the average of
    # a constant sequence (fixed point, frozen coordinate) exact
    N, d = X.shape
    ref = bank.evaluate(X)
    total = np.zeros((N, len(bank)))
    buf = np.empty((block, N, d))
    X = X.copy()
    done = 0
    while done < n:
        m = min(block, n - done)
        for t in range(m):
            buf[t] = X
            X = np.mod(g.lift(X), 1.0)
        vals = bank.evaluate(buf[:m].reshape(-1, d)).reshape(m, N, -1)
        total += (vals - ref[None]).sum(axis=0)
        done += m
    return ref + total / n


def _check_horizon(n, max_length):
    if n < MIN_HORIZON:
        raise ValidationError(f"profile horizon must be >= {MIN_HORIZON}")
    if n > max_length:
        raise OrbitLengthExceeded(f"n = {n} exceeds orbit cap {max_length}")


def forward_averages(fmap: TorusMap, points, bank, n, threads=None):
    """Forward Birkhoff averages of the bank at every point, shape (N, len(bank))."""
    X = wrap(np.atleast_2d(np.asarray(points, dtype=float)))
    return map_chunks(lambda C: _forward_sums(fmap, C, bank, n), X, chunk=256, threads=threads)


def profiles(fmap: TorusMap, points, bank=None, n=10**5, threads=None,
             max_length=MAX_ORBIT_LENGTH):
    """Profiles at many points.  The backward half is literally the forward
    computation for the inverse map, so the two agree bit for bit."""
    _check_horizon(n, max_length)
    bank = bank or default_bank(fmap.dim)
    X = wrap(np.atleast_2d(np.asarray(points, dtype=float)))
    fw = forward_averages(fmap, X, bank, n, threads)
    bw = forward_averages(fmap.inverse(), X, bank, n, threads)
    return [BirkhoffProfile(X[i], n, fw[i], bw[i]) for i in range(len(X))]


def profile(fmap: TorusMap, x, bank=None, n=10**5, max_length=MAX_ORBIT_LENGTH):
    return profiles(fmap, np.asarray(x, dtype=float)[None, :], bank, n,
                    max_length=max_length)[0]


@dataclass(frozen=True)
class ComponentClustering:
    profiles: list
    assignment: np.ndarray
    centers: np.ndarray
    radius: float
    count: int
    fractions: np.ndarray

    def to_dict(self):
        return {"radius": self.radius, "count": self.count,
                "fractions": [float(f) for f in self.fractions],
                "assignment": [int(a) for a in self.assignment]}


def cluster_components(profs, radius=DEFAULT_RADIUS) -> ComponentClustering:
    """Greedy leader clustering in the sup norm of the (forward, backward) vector.

    Points are visited in lexicographic order of their coordinates; a point
    joins the nearest existing leader within ``radius`` or becomes a leader.
    ``assignment`` is indexed like the input list.
    """
    profs = list(profs)
    if not profs:
        raise ValidationError("no profiles to cluster")
    if len({(p.horizon, len(p.forward)) for p in profs}) > 1:
        raise ValidationError("profiles must share horizon and bank")
    P = np.array([p.point for p in profs])
    V = np.array([p.vector for p in profs])
    order = np.lexsort(P.T[::-1])
    assignment = np.empty(len(profs), dtype=int)
    centers = []
    for i in order:
        if centers:
            dist = np.abs(np.asarray(centers) - V[i]).max(axis=1)
            j = int(np.argmin(dist))
            if dist[j] <= radius:
                assignment[i] = j
                continue
        centers.append(V[i])
        assignment[i] = len(centers) - 1
    counts = np.bincount(assignment, minlength=len(centers))
    return ComponentClustering(profs, assignment, np.asarray(centers), float(radius),
                               len(centers), counts / len(profs))


# --------------------------------------------------------------------------
# stable sets


@dataclass(frozen=True)
class ConvergenceFit:
    distances: np.ndarray
    rate: float
    converging: bool


def convergence_fit(fmap: TorusMap, x, y, horizon_conv=DEFAULT_HORIZON_CONV):
    """Distances d(f^k x, f^k y), k = 0..horizon_conv, and the fitted log-rate.

    The rate is the least-squares slope of log d_k over the k with d_k above
    the round-off floor; a pair converges when that slope is clearly
    negative and the final distance is below the initial one.
    """
    X = wrap(np.atleast_2d(np.asarray(x, dtype=float)))
    Y = wrap(np.atleast_2d(np.asarray(y, dtype=float)))
    D = np.empty((len(X), horizon_conv + 1))
    for k in range(horizon_conv + 1):
        D[:, k] = torus_distance(X, Y)
        X, Y = wrap(fmap.lift(X)), wrap(fmap.lift(Y))
    ks = np.arange(horizon_conv + 1, dtype=float)
    rates = np.zeros(len(D))
    conv = np.zeros(len(D), dtype=bool)
    for i, d in enumerate(D):
        ok = d > DISTANCE_FLOOR
        if ok.sum() >= 2:
            rates[i] = np.polyfit(ks[ok], np.log(d[ok]), 1)[0]
            conv[i] = rates[i] < CONVERGENCE_SLOPE and d[ok][-1] < d[0]
    return [ConvergenceFit(D[i], float(rates[i]), bool(conv[i])) for i in range(len(D))]


def _pull_back_correction(fmap: TorusMap, x, Y, steps, tol):
    """Move points sampled on the affine E^cs line closer to the stable set.

    Push x and Y forward ``steps`` times, drop the E^cu component of the
    displacement at f^m(x) (oblique projection along E^cu), and pull back.
    The dropped component is what the curvature of the stable set turns
    into expansion; pulling back shrinks the remaining error.  Points are
    left unchanged when the splitting at f^m(x) is not resolved.
    """
    xm, Ym = x[None, :].copy(), Y.copy()
    for _ in range(steps):
        xm, Ym = fmap.lift(xm), fmap.lift(Ym)
    fb = estimate_frames(fmap, xm)
    if fb.residual[0] > tol:
        return Y
    B = np.concatenate([fb.cs[0], fb.cu[0]], axis=1)
    coef = np.linalg.solve(B, (Ym - xm).T)
    k = fb.cs.shape[-1]
    Z = xm + (fb.cs[0] @ coef[:k]).T
    g = fmap.inverse()
    for _ in range(steps):
        Z = g.lift(Z)
    # undo the integer drift of the lifted round trip
    return x[None, :] + torus_delta(x[None, :], Z)


def stable_candidates(fmap: TorusMap, x, frame: SplittingFrame, count=8, t_scale=1e-3,
                      horizon_conv=DEFAULT_HORIZON_CONV, seed=0, correction_steps=10,
                      tol=DEFAULT_TOL):
    """Points x + t v with v a unit vector of E^cs and |t| <= t_scale, after a
    pull-back correction, keeping only those whose forward distance to x shrinks.

    An unresolved frame is not an error: its candidates simply fail the
    convergence filter (the identity map yields an empty list).
    """
    x = wrap(np.asarray(x, dtype=float))
    Q = frame.cs_basis
    g = rng.stream(seed, "hopf.candidates", 0)
    coeffs = g.standard_normal((count, Q.shape[1]))
    dirs = coeffs @ Q.T
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    t = t_scale * (np.arange(1, count + 1) / count) * np.where(np.arange(count) % 2, -1.0, 1.0)
    Y = x[None, :] + t[:, None] * dirs
    if correction_steps and frame.convergence_residual <= tol:
        Y = _pull_back_correction(fmap, x, Y, correction_steps, tol)
    fits = convergence_fit(fmap, np.repeat(x[None, :], count, axis=0), Y, horizon_conv)
    return [wrap(Y[i]) for i in range(count) if fits[i].converging]


def unstable_candidates(fmap: TorusMap, x, frame: SplittingFrame, count=8, t_scale=1e-3,
                        horizon_conv=DEFAULT_HORIZON_CONV, seed=0, correction_steps=10):
    """Stable candidates of the inverse map (E^cu of f is E^cs of f^-1)."""
    swapped = SplittingFrame(frame.point, frame.cu_basis, frame.cs_basis,
                             frame.convergence_residual, frame.angle)
    return stable_candidates(fmap.inverse(), x, swapped, count, t_scale, horizon_conv, seed,
                             correction_steps)


@dataclass(frozen=True)
class PairReport:
    x: np.ndarray
    y: np.ndarray
    rate: float
    converging: bool
    gap: float
    passed: bool | None


@dataclass(frozen=True)
class TransferSummary:
    pairs: list
    converging: int
    not_converging: int
    passed: int
    tolerance: float

    @property
    def pass_rate(self):
        return self.passed / self.converging if self.converging else 1.0


def stable_transfer_check(fmap: TorusMap, pairs, bank=None, n=10**5,
                          horizon_conv=DEFAULT_HORIZON_CONV, tolerance=DEFAULT_TRANSFER_TOL,
                          threads=None) -> TransferSummary:
    """Forward-profile gap on every converging pair; non-converging pairs are counted only."""
    _check_horizon(n, MAX_ORBIT_LENGTH)
    bank = bank or default_bank(fmap.dim)
    if not pairs:
        return TransferSummary([], 0, 0, 0, tolerance)
    X = np.array([p[0] for p in pairs], dtype=float)
    Y = np.array([p[1] for p in pairs], dtype=float)
    fits = convergence_fit(fmap, X, Y, horizon_conv)
    same = np.all(wrap(X) == wrap(Y), axis=1)
    fx = forward_averages(fmap, X, bank, n, threads)
    fy = forward_averages(fmap, Y, bank, n, threads)
    gaps = np.abs(fx - fy).max(axis=1)
    out = []
    for i, fit in enumerate(fits):
        conv = fit.converging or bool(same[i])
        out.append(PairReport(wrap(X[i]), wrap(Y[i]), fit.rate, conv, float(gaps[i]),
                              bool(gaps[i] <= tolerance) if conv else None))
    nconv = sum(r.converging for r in out)
    return TransferSummary(out, nconv, len(out) - nconv,
                           sum(bool(r.passed) for r in out), tolerance)


# --------------------------------------------------------------------------
# CSV export


def write_profiles_csv(profs, bank: ObservableBank, path, assignment=None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        d = len(profs[0].point)
        head = [f"x{i + 1}" for i in range(d)] + [f"fwd:{n}" for n in bank.names] \
            + [f"bwd:{n}" for n in bank.names]
        w.writerow(head + (["cluster"] if assignment is not None else []))
        for i, p in enumerate(profs):
            row = [repr(float(v)) for v in np.concatenate([p.point, p.forward, p.backward])]
            w.writerow(row + ([int(assignment[i])] if assignment is not None else []))


def write_pairs_csv(summary: TransferSummary, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        d = len(summary.pairs[0].x) if summary.pairs else 0
        w.writerow([f"x{i + 1}" for i in range(d)] + [f"y{i + 1}" for i in range(d)]
                   + ["rate", "converging", "gap", "passed"])
        for r in summary.pairs:
            w.writerow([repr(float(v)) for v in np.concatenate([r.x, r.y])]
                       + [repr(r.rate), int(r.converging), repr(r.gap),
                          "" if r.passed is None else int(r.passed)])
