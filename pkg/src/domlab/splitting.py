"""Estimation of the dominated splitting E^cs + E^cu and of restricted cocycles.

E^cu at x is found by pushing a random frame along Df over the orbit segment
f^-T(x), ..., x and re-orthonormalizing every step; E^cs is the same
construction for f^-1.  Two independent initial frames are pushed in
parallel and their final Grassmannian distance is the convergence residual.

Restricted cocycles Df^n|E_x are transported only in the stable direction
of the bundle: E^cu forwards from x, E^cs backwards from beyond f^n(x) along
the stored forward orbit.  Log-norms of all exterior powers are accumulated
in log space (see ``linalg.LogCompoundAccumulator``).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import NoConvergence, SingularRestriction, ValidationError
from .linalg import (LogCompoundAccumulator, grassmann_distance, min_principal_angle,
                     orthonormalize)
from .parallel import map_chunks
from .system import TorusMap, wrap

DEFAULT_TOL = 1e-9
DEFAULT_BURN_IN = 100
DEFAULT_ITERS = 200
CHUNK = 512


@dataclass(frozen=True)
class BundleEstimate:
    """One half of a splitting frame ("SplittingFrame-partial")."""

    point: np.ndarray
    basis: np.ndarray
    residual: float
    bundle: str

    @property
    def converged(self):
        return self.residual <= DEFAULT_TOL


@dataclass(frozen=True)
class SplittingFrame:
    point: np.ndarray
    cs_basis: np.ndarray
    cu_basis: np.ndarray
    convergence_residual: float
    angle: float

    @property
    def dim_cs(self):
        return self.cs_basis.shape[1]

    @property
    def dim_cu(self):
        return self.cu_basis.shape[1]


@dataclass(frozen=True)
class FrameBatch:
    """Splitting frames at many points, stored as stacked arrays."""

    points: np.ndarray
    cs: np.ndarray
    cu: np.ndarray
    residual_cs: np.ndarray
    residual_cu: np.ndarray

    @property
    def residual(self):
        return np.maximum(self.residual_cs, self.residual_cu)

    @property
    def angle(self):
        return min_principal_angle(self.cs, self.cu)

    def converged(self, tol=DEFAULT_TOL):
        return self.residual <= tol

    def __len__(self):
        return len(self.points)

    def __getitem__(self, i):
        if isinstance(i, (int, np.integer)):
            return SplittingFrame(self.points[i], self.cs[i], self.cu[i],
                                  float(self.residual[i]), float(self.angle[i]))
        return FrameBatch(self.points[i], self.cs[i], self.cu[i],
                          self.residual_cs[i], self.residual_cu[i])

    @classmethod
    def from_frames(cls, frames):
        return cls(np.array([f.point for f in frames]), np.array([f.cs_basis for f in frames]),
                   np.array([f.cu_basis for f in frames]),
                   np.array([f.convergence_residual for f in frames]),
                   np.array([f.convergence_residual for f in frames]))


@dataclass(frozen=True)
class DominationEstimate:
    horizon: int
    ratio_sup: float
    ratios: np.ndarray
    C: float
    tau: float
    residual: float
    dominated: bool


def _initial_frames(d, k, seed):
    g = rng.stream(seed, "splitting.init", d * 10 + k)
    V1, _ = orthonormalize(g.standard_normal((d, k)))
    V2, _ = orthonormalize(g.standard_normal((d, k)))
    return V1, V2


def _push_linear(A, V, steps):
    for _ in range(steps):
        V, _ = orthonormalize(A @ V)
    return V


def estimate_bundle(fmap: TorusMap, X, dim: int, burn_in=DEFAULT_BURN_IN,
                    iters=DEFAULT_ITERS, seed=0):
    """Dominant ``dim``-dimensional forward-invariant bundle of ``fmap`` at rows of X.

    Returns ``(Q, residual)`` with Q of shape (N, d, dim).
    """
    X = wrap(np.atleast_2d(np.asarray(X, dtype=float)))
    d = fmap.dim
    if not 1 <= dim <= d - 1:
        raise ValidationError(f"bundle dimension must lie in [1, {d - 1}], got {dim}")
    T = int(burn_in) + int(iters)
    V1, V2 = _initial_frames(d, dim, seed)

    if fmap.is_linear:
        A = fmap.jacobian(np.zeros(d))
        Q1, Q2 = _push_linear(A, V1, T), _push_linear(A, V2, T)
        res = float(grassmann_distance(Q1, Q2))
        n = len(X)
        return np.broadcast_to(Q1, (n, d, dim)).copy(), np.full(n, res)

    inv = fmap.inverse()

    def work(Xc):
        m = len(Xc)
        Z = np.empty((T + 1, m, d))
        Z[0] = Xc
        for t in range(T):
            Z[t + 1] = wrap(inv.lift(Z[t]))
        W = np.concatenate([np.broadcast_to(V1, (m, d, dim)),
                            np.broadcast_to(V2, (m, d, dim))], axis=-1)
        for t in range(T, 0, -1):
            J = fmap.jacobian(Z[t])
            W = J @ W
            Q1, _ = orthonormalize(W[..., :dim])
            Q2, _ = orthonormalize(W[..., dim:])
            W = np.concatenate([Q1, Q2], axis=-1)
        Q1, Q2 = W[..., :dim], W[..., dim:]
        return Q1, grassmann_distance(Q1, Q2)

    return map_chunks(work, X, CHUNK)


def _check(residual, tol, what):
    worst = float(np.max(residual))
    if worst > tol:
        raise NoConvergence(f"{what} did not converge: residual {worst:.3e} > {tol:.1e}",
                            residual=worst)


def estimate_cu(fmap: TorusMap, x, dim_cu=None, burn_in=DEFAULT_BURN_IN, iters=DEFAULT_ITERS,
                tol=DEFAULT_TOL, seed=0, strict=True) -> BundleEstimate:
    dim_cu = fmap.dim_cu if dim_cu is None else dim_cu
    Q, res = estimate_bundle(fmap, x, dim_cu, burn_in, iters, seed)
    if strict:
        _check(res, tol, "E^cu")
    return BundleEstimate(wrap(np.asarray(x, float)), Q[0], float(res[0]), "cu")


def estimate_cs(fmap: TorusMap, x, dim_cs=None, burn_in=DEFAULT_BURN_IN, iters=DEFAULT_ITERS,
                tol=DEFAULT_TOL, seed=0, strict=True) -> BundleEstimate:
    dim_cs = fmap.dim_cs if dim_cs is None else dim_cs
    est = estimate_cu(fmap.inverse(), x, dim_cs, burn_in, iters, tol, seed, strict)
    return BundleEstimate(est.point, est.basis, est.residual, "cs")


def estimate_frames(fmap: TorusMap, X, dim_cs=None, burn_in=DEFAULT_BURN_IN,
                    iters=DEFAULT_ITERS, seed=0) -> FrameBatch:
    """Both bundles at every row of X; never raises on poor convergence."""
    dim_cs = fmap.dim_cs if dim_cs is None else dim_cs
    X = wrap(np.atleast_2d(np.asarray(X, dtype=float)))
    Qu, ru = estimate_bundle(fmap, X, fmap.dim - dim_cs, burn_in, iters, seed)
    Qs, rs = estimate_bundle(fmap.inverse(), X, dim_cs, burn_in, iters, seed)
    return FrameBatch(X, Qs, Qu, rs, ru)


def estimate_splitting(fmap: TorusMap, x, dim_cs=None, burn_in=DEFAULT_BURN_IN,
                       iters=DEFAULT_ITERS, tol=DEFAULT_TOL, seed=0, strict=True) -> SplittingFrame:
    fb = estimate_frames(fmap, x, dim_cs, burn_in, iters, seed)
    if strict:
        _check(fb.residual, tol, "splitting")
    return fb[0]


def scan_splits(fmap: TorusMap, x, burn_in=DEFAULT_BURN_IN, iters=DEFAULT_ITERS, seed=0):
    """Residuals of the splitting for every cs dimension (1..d-1) at x."""
    out = {}
    for cs in range(1, fmap.dim):
        fb = estimate_frames(fmap, x, cs, burn_in, iters, seed)
        out[cs] = float(fb.residual[0])
    return out


# --------------------------------------------------------------------------
# restricted cocycles


def transport_cu(fmap: TorusMap, X, Q0, n: int):
    """Log-norms of wedge^j Df^n|E^cu_x, j = 0..k, pushing the frame Q0 forward.

    Returns ``(L, Xn)``: L of shape (N, k+1) and the endpoints f^n(x).
    """
    X = np.atleast_2d(X)
    Q0 = np.asarray(Q0)
    if Q0.ndim == 2:
        Q0 = np.broadcast_to(Q0, (len(X),) + Q0.shape)
    k = Q0.shape[-1]
    N = len(X)

    if fmap.is_linear:
        A = fmap.jacobian(np.zeros(fmap.dim))
        acc = LogCompoundAccumulator(1, k)
        B = np.swapaxes(Q0[:1], -1, -2) @ A @ Q0[:1]
        for _ in range(n):
            acc.push(B)
        Xn = X.copy()
        for _ in range(n):
            Xn = wrap(fmap.lift(Xn))
        return np.repeat(acc.log_norms(), N, axis=0), Xn

    def work(args):
        Xc, Qc = args[..., : fmap.dim], args[..., fmap.dim:].reshape(len(args), fmap.dim, k)
        acc = LogCompoundAccumulator(len(Xc), k)
        Q = Qc
        P = Xc
        for _ in range(n):
            W = fmap.jacobian(P) @ Q
            Q, R = orthonormalize(W)
            acc.push(R)
            P = wrap(fmap.lift(P))
        return acc.log_norms(), P

    packed = np.concatenate([X, Q0.reshape(N, -1)], axis=1)
    return map_chunks(work, packed, CHUNK)


def transport_cs(fmap: TorusMap, X, dim_cs: int, n: int, burn_in=DEFAULT_BURN_IN + DEFAULT_ITERS,
                 seed=0):
    """Log-norms of wedge^j Df^n|E^cs_x, j = 0..k, plus the E^cs frame at x.

    E^cs is carried backwards from f^(n+burn_in)(x) along the stored forward
    orbit; the backward products R_0 ... R_{n-1} form (Df^n|E^cs)^-1.
    Returns ``(L, Q, residual)``.
    """
    X = np.atleast_2d(X)
    d, k = fmap.dim, dim_cs
    N = len(X)
    V1, V2 = _initial_frames(d, k, seed)

    if fmap.is_linear:
        A = fmap.jacobian(np.zeros(d))
        Ainv = np.linalg.inv(A)
        Q1, Q2 = _push_linear(Ainv, V1, burn_in), _push_linear(Ainv, V2, burn_in)
        B = Q1.T @ A @ Q1
        acc = LogCompoundAccumulator(1, k)
        for _ in range(n):
            acc.push(B)
        res = float(grassmann_distance(Q1, Q2))
        return (np.repeat(acc.log_norms(), N, axis=0),
                np.broadcast_to(Q1, (N, d, k)).copy(), np.full(N, res))

    T = n + burn_in

    def work(Xc):
        m = len(Xc)
        Z = np.empty((T + 1, m, d))
        Z[0] = Xc
        for t in range(T):
            Z[t + 1] = wrap(fmap.lift(Z[t]))
        W = np.concatenate([np.broadcast_to(V1, (m, d, k)), np.broadcast_to(V2, (m, d, k))], -1)
        acc = LogCompoundAccumulator(m, k)
        for t in range(T - 1, -1, -1):
            J = fmap.jacobian(Z[t])
            W = np.linalg.solve(J, W)
            Q1, R1 = orthonormalize(W[..., :k])
            Q2, _ = orthonormalize(W[..., k:])
            W = np.concatenate([Q1, Q2], axis=-1)
            if t < n:
                acc.push(R1)
        S = acc.log_norms()
        # log||wedge^j P|| = log||wedge^(k-j) S|| - log|det S| for P = S^-1
        L = S[:, ::-1] - S[:, -1:]
        Q1, Q2 = W[..., :k], W[..., k:]
        return L, Q1, grassmann_distance(Q1, Q2)

    return map_chunks(work, X, CHUNK)


def log_singular_values(L):
    """log sigma_1..sigma_k from log wedge-norms (N, k+1)."""
    return np.diff(L, axis=-1)


def restricted_log_norms(fmap: TorusMap, frames: FrameBatch, n: int, bundle: str):
    """log ||wedge^j Df^n|E_x|| (forward time) for bundle 'cu' or 'cs'."""
    if bundle == "cu":
        L, _ = transport_cu(fmap, frames.points, frames.cu, n)
    elif bundle == "cs":
        L, _, _ = transport_cs(fmap, frames.points, frames.cs.shape[-1], n)
    else:
        raise ValidationError(f"bundle must be 'cs' or 'cu', got {bundle!r}")
    if not np.all(np.isfinite(L)):
        raise SingularRestriction(f"restricted {bundle} cocycle is numerically singular")
    return L


def _as_batch(frames):
    if isinstance(frames, SplittingFrame):
        return FrameBatch.from_frames([frames])
    if isinstance(frames, (list, tuple)):
        return FrameBatch.from_frames(list(frames))
    return frames


def domination_ratios(fmap: TorusMap, frames, n: int):
    """||Df^n|E^cs|| * ||(Df^n|E^cu)^-1|| at every frame."""
    fb = _as_batch(frames)
    if n == 0:
        return np.ones(len(fb))
    Ls = restricted_log_norms(fmap, fb, n, "cs")
    Lu = restricted_log_norms(fmap, fb, n, "cu")
    log_top_cs = Ls[:, 1]
    log_min_cu = Lu[:, -1] - Lu[:, -2]
    return np.exp(log_top_cs - log_min_cu)


def domination_ratio(fmap: TorusMap, frame, n: int) -> float:
    return float(np.max(domination_ratios(fmap, frame, n)))


def fit_domination(fmap: TorusMap, frames, N: int, residual_threshold=0.25,
                   tol=DEFAULT_TOL) -> DominationEstimate:
    """Log-linear fit log r_n = log C + n log tau of the sup-over-frames ratio.

    ``dominated`` also requires every frame to be converged: under genuine
    domination power iteration converges geometrically, while polynomial
    decay (a parabolic shear) can still produce a tau slightly below 1.
    """
    if N < 3:
        raise ValidationError("fit_domination needs N >= 3")
    fb = _as_batch(frames)
    ns = np.arange(1, N + 1)
    ratios = np.array([np.max(domination_ratios(fmap, fb, int(n))) for n in ns])
    y = np.log(ratios)
    (slope, intercept), res, *_ = np.polyfit(ns, y, 1, full=True)
    rms = float(np.sqrt(res[0] / len(ns))) if len(res) else 0.0
    tau, C = float(np.exp(slope)), float(np.exp(intercept))
    converged = bool(np.all(fb.residual <= tol))
    dominated = bool(converged and tau < 1.0 - 1e-6 and rms <= residual_threshold)
    return DominationEstimate(N, float(ratios.max()), ratios, C, tau, rms, dominated)
