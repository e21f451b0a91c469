"""Constant-conefield certificates and chart-local disk intersection tests.

A cone around a k-dimensional axis subspace A with half-angle alpha is
the set of vectors making an angle at most alpha with A.  A bundle E_x lies
inside it iff the largest principal angle between E_x and A is at most
alpha.  Two such cones meet only at 0 when the smallest principal angle
between the axes exceeds the sum of the half-angles.

The intersection test uses flat disks (affine pieces of the estimated
bundles), so everything here is local to one chart; no search on the
universal cover is attempted.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import rng
from .errors import NoConvergence, UnsupportedDimension, ValidationError
from .inflatability import default_grid_resolution, grid_points
from .linalg import grassmann_distance, min_principal_angle
from .splitting import DEFAULT_TOL, estimate_frames
from .system import TorusMap

SAFETY_MARGIN = 0.01
CHART_CAP = 0.4
INTERSECTION_TOL = 1e-6
# beyond half a period the minimal-image pairing of basepoints is ambiguous
MAX_SEPARATION = 0.5


@dataclass(frozen=True)
class Cone:
    axis: np.ndarray
    half_angle: float
    max_deviation: float


@dataclass(frozen=True)
class ConefieldCertificate:
    cs: Cone
    cu: Cone
    containment_cs: np.ndarray
    containment_cu: np.ndarray
    transversality_margin: float
    grid_resolution: int

    @property
    def valid(self):
        return bool(np.all(self.containment_cs > 0) and np.all(self.containment_cu > 0)
                    and self.transversality_margin > 0)

    @property
    def admissible_ratio(self):
        """Largest separation / K for which valid cones force flat disks to meet."""
        return float(np.sin(self.transversality_margin)) if self.valid else 0.0

    def to_dict(self):
        return {
            "valid": self.valid,
            "half_angle_cs": self.cs.half_angle,
            "half_angle_cu": self.cu.half_angle,
            "max_deviation_cs": self.cs.max_deviation,
            "max_deviation_cu": self.cu.max_deviation,
            "axis_cs": self.cs.axis.tolist(),
            "axis_cu": self.cu.axis.tolist(),
            "min_containment_cs": float(self.containment_cs.min()),
            "min_containment_cu": float(self.containment_cu.min()),
            "transversality_margin": self.transversality_margin,
            "grid_resolution": self.grid_resolution,
        }


def mean_subspace(Q):
    """Chordal mean of subspaces: top eigenvectors of the averaged projector."""
    k = Q.shape[-1]
    P = np.einsum("nik,njk->ij", Q, Q) / len(Q)
    w, V = np.linalg.eigh(P)
    return V[:, ::-1][:, :k]


def _fit(Q, margin):
    axis = mean_subspace(Q)
    dev = grassmann_distance(np.broadcast_to(axis, Q.shape), Q)
    half = float(dev.max()) + margin
    return Cone(axis, half, float(dev.max())), half - dev


def fit_constant_cones(fmap: TorusMap, grid_resolution=None, safety_margin=SAFETY_MARGIN,
                       seed=0, tol=DEFAULT_TOL) -> ConefieldCertificate:
    res = grid_resolution or default_grid_resolution(fmap.dim)
    G = grid_points(fmap.dim, res)
    fb = estimate_frames(fmap, G, seed=seed)
    bad = int((fb.residual > tol).sum())
    if bad:
        raise NoConvergence(f"splitting failed at {bad}/{len(G)} grid points",
                            residual=float(fb.residual.max()))
    cs, mcs = _fit(fb.cs, safety_margin)
    cu, mcu = _fit(fb.cu, safety_margin)
    trans = float(min_principal_angle(cs.axis, cu.axis)) - cs.half_angle - cu.half_angle
    return ConefieldCertificate(cs, cu, mcs, mcu, trans, res)


@dataclass(frozen=True)
class IntersectionStats:
    trials: int
    hits: int
    K_span: float
    separation: float
    min_slack: float

    @property
    def hit_rate(self):
        return self.hits / self.trials

    def to_dict(self):
        return {**asdict(self), "hit_rate": self.hit_rate}


def flat_disks_intersect(p, U, q, V, K, tol=INTERSECTION_TOL):
    """Do p + U s and q + V t (|s|, |t| <= K, complementary dims) meet?

    Returns (hit, slack) with slack = K - max(|s|, |t|) at the unique
    intersection point of the two affine subspaces.
    """
    M = np.concatenate([U, -V], axis=-1)
    st = np.linalg.solve(M, (q - p)[..., None])[..., 0]
    k = U.shape[-1]
    r = np.maximum(np.linalg.norm(st[..., :k], axis=-1), np.linalg.norm(st[..., k:], axis=-1))
    slack = K - r
    return slack >= -tol, slack


def disk_intersection_test(fmap: TorusMap, K_span=CHART_CAP, trials=1000, seed=0,
                           separation=None, certificate=None,
                           fixed_separation=False) -> IntersectionStats:
    """Hit rate of cs-disk / cu-disk pairs of radius K_span at nearby basepoints.

    The second basepoint is uniform in the ball of radius ``separation``
    around the first (or on its sphere when ``fixed_separation``).
    ``separation`` defaults to the admissible value sin(margin) * K_span taken
    from ``certificate`` (fitted if not supplied).
    """
    if fmap.dim_cs > 2 or fmap.dim_cu > 2:
        raise UnsupportedDimension("intersection test needs cs, cu in {1, 2}")
    if not 0 < K_span <= CHART_CAP:
        raise ValidationError(f"K_span must lie in (0, {CHART_CAP}]")
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    if separation is None:
        certificate = certificate or fit_constant_cones(fmap, seed=seed)
        separation = certificate.admissible_ratio * K_span
    if not 0 <= separation <= MAX_SEPARATION:
        raise ValidationError(f"separation must lie in [0, {MAX_SEPARATION}] (one chart)")
    g = rng.stream(seed, "productstructure.trials", 0)
    P = g.random((trials, fmap.dim))
    D = g.standard_normal((trials, fmap.dim))
    D /= np.linalg.norm(D, axis=1, keepdims=True)
    u = g.random(trials)
    radii = np.full(trials, separation) if fixed_separation else separation * u ** (1.0 / fmap.dim)
    Qpt = P + radii[:, None] * D  # same chart: lifted, not reduced
    fp = estimate_frames(fmap, P, seed=seed)
    fq = estimate_frames(fmap, Qpt, seed=seed)
    hit, slack = flat_disks_intersect(P, fp.cs, Qpt, fq.cu, K_span)
    return IntersectionStats(trials, int(hit.sum()), float(K_span), float(separation),
                             float(slack.min()))
