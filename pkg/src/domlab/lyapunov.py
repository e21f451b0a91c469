"""Finite-time Lyapunov exponents on the estimated bundles, hyperbolicity
classification and Birkhoff averages.

The asymptotic limsups are replaced by fixed horizons n:

    lambda_cs(x) = (1/n) log ||Df^n |E^cs_x||
    lambda_cu(x) = -(1/n) log ||Df^-n |E^cu_x||

The "hyperbolic fraction" returned by ``classify_hyperbolic`` is a
finite-horizon Monte Carlo proxy for the set of hyperbolic points.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OrbitLengthExceeded, SingularRestriction, ValidationError
from .splitting import FrameBatch, SplittingFrame, transport_cs
from .system import MAX_ORBIT_LENGTH, TorusMap, wrap

DEFAULT_MARGIN = 0.05


@dataclass(frozen=True)
class LyapunovEstimate:
    point: np.ndarray
    horizon: int
    lambda_cs: float
    lambda_cu: float
    spectrum_cs: np.ndarray
    spectrum_cu: np.ndarray

    @property
    def spectrum(self):
        return np.concatenate([self.spectrum_cu, self.spectrum_cs])


@dataclass(frozen=True)
class HyperbolicityVerdict:
    point: np.ndarray
    verdict: str
    margin: float


def _frames(frames):
    if isinstance(frames, SplittingFrame):
        return FrameBatch.from_frames([frames]), True
    return frames, False


def exponent_arrays(fmap: TorusMap, points, dim_cs: int, n: int):
    """Vectorized core: (lambda_cs, lambda_cu, spectrum_cs, spectrum_cu) arrays."""
    if n < 1:
        raise ValidationError("horizon n must be >= 1")
    X = np.atleast_2d(points)
    Ls, _, _ = transport_cs(fmap, X, dim_cs, n)
    # E^cu of f is the centre-stable bundle of f^-1
    Lu, _, _ = transport_cs(fmap.inverse(), X, fmap.dim - dim_cs, n)
    if not (np.all(np.isfinite(Ls)) and np.all(np.isfinite(Lu))):
        raise SingularRestriction("restricted cocycle is numerically singular")
    spec_cs = np.diff(Ls, axis=1) / n
    spec_cu = (-np.diff(Lu, axis=1) / n)[:, ::-1]
    return Ls[:, 1] / n, -Lu[:, 1] / n, spec_cs, spec_cu


def finite_time_exponents(fmap: TorusMap, frame, n: int):
    """LyapunovEstimate for a SplittingFrame, or a list of them for a FrameBatch."""
    fb, single = _frames(frame)
    lcs, lcu, scs, scu = exponent_arrays(fmap, fb.points, fb.cs.shape[-1], n)
    out = [LyapunovEstimate(fb.points[i], n, float(lcs[i]), float(lcu[i]), scs[i], scu[i])
           for i in range(len(fb))]
    return out[0] if single else out


def classify_hyperbolic(estimates, margin_threshold=DEFAULT_MARGIN):
    """Verdict per estimate plus the fraction classified hyperbolic."""
    estimates = list(estimates)
    if len({e.horizon for e in estimates}) > 1:
        raise ValidationError("estimates must share a horizon")
    verdicts = []
    for e in estimates:
        margin = min(-e.lambda_cs, e.lambda_cu)
        kind = "hyperbolic" if margin > margin_threshold else "undecided"
        verdicts.append(HyperbolicityVerdict(e.point, kind, float(margin)))
    frac = sum(v.verdict == "hyperbolic" for v in verdicts) / max(len(verdicts), 1)
    return verdicts, frac


def birkhoff_average(fmap: TorusMap, x, observable, n: int, direction="forward",
                     max_length=MAX_ORBIT_LENGTH):
    """(1/n) sum_{k<n} phi(f^{+-k}(x)); ``x`` may be a single point or a batch."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    if n > max_length:
        raise OrbitLengthExceeded(f"n = {n} exceeds orbit cap {max_length}")
    if direction not in ("forward", "backward"):
        raise ValidationError("direction must be 'forward' or 'backward'")
    g = fmap if direction == "forward" else fmap.inverse()
    X = wrap(np.asarray(x, dtype=float))
    single = X.ndim == 1
    X = np.atleast_2d(X)
    # running mean: exact for constants and fixed points
    avg = np.zeros(len(X))
    for k in range(n):
        avg += (observable(X) - avg) / (k + 1)
        X = wrap(g.lift(X))
    return float(avg[0]) if single else avg
