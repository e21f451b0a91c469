"""Phase space T^d, conservative example maps and their exact differentials.

Points are numpy arrays of shape ``(d,)`` (or ``(N, d)`` for batches).  Maps
act on *lifted* real coordinates; results are reduced mod 1 only by
``evaluate``/``iterate_orbit``.  Every map is a composition of elementary
volume-preserving pieces (integer automorphisms and shears), which gives the
inverse and the Jacobian in closed form.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import OrbitLengthExceeded, UnknownIdentifier, ValidationError

TWO_PI = 2.0 * np.pi
MAX_ORBIT_LENGTH = 10**6


def wrap(x):
    """Canonical representative in [0, 1)^d."""
    y = np.mod(x, 1.0)
    # np.mod can return exactly 1.0 for tiny negative inputs
    return np.where(y >= 1.0, 0.0, y)


def torus_point(coords):
    x = np.asarray(coords, dtype=float)
    if x.ndim != 1 or not np.all(np.isfinite(x)):
        raise ValidationError(f"invalid torus point: {coords!r}")
    return wrap(x)


def torus_delta(a, b):
    """Minimal-image displacement b - a, each component in [-1/2, 1/2]."""
    d = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    return d - np.round(d)


def torus_distance(a, b):
    return np.linalg.norm(torus_delta(a, b), axis=-1)


def _as_batch(x):
    x = np.asarray(x, dtype=float)
    return (x[None, :], True) if x.ndim == 1 else (x, False)


# --------------------------------------------------------------------------
# elementary pieces


@dataclass(frozen=True)
class Linear:
    matrix: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.matrix, dtype=float)
        if not np.allclose(a, np.round(a)) or abs(abs(np.linalg.det(a)) - 1.0) > 1e-12:
            raise ValidationError("toral automorphism needs an integer matrix with |det| = 1")
        object.__setattr__(self, "matrix", np.round(a))

    def apply(self, X):
        return X @ self.matrix.T

    def jacobian(self, X):
        return np.broadcast_to(self.matrix, (X.shape[0],) + self.matrix.shape)

    def inverted(self):
        return Linear(np.round(np.linalg.inv(self.matrix)))


@dataclass(frozen=True)
class Shear:
    """x[target] += amplitude * sin(2 pi x[source]); unit Jacobian determinant."""

    target: int
    source: int
    amplitude: float

    def __post_init__(self):
        if self.target == self.source:
            raise ValidationError("shear target and source must differ")

    def apply(self, X):
        Y = X.copy()
        Y[:, self.target] += self.amplitude * np.sin(TWO_PI * np.mod(X[:, self.source], 1.0))
        return Y

    def jacobian(self, X):
        n, d = X.shape
        J = np.zeros((n, d, d))
        J[:, np.arange(d), np.arange(d)] = 1.0
        J[:, self.target, self.source] = (
            TWO_PI * self.amplitude * np.cos(TWO_PI * np.mod(X[:, self.source], 1.0))
        )
        return J

    def inverted(self):
        return Shear(self.target, self.source, -self.amplitude)


# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TorusMap:
    """Conservative diffeomorphism of T^d given as a composition of pieces.

    ``pieces`` are applied left to right.  ``dim_cs`` is the default
    dimension of the centre-stable bundle used by the analysis modules.
    """

    name: str
    dim: int
    pieces: tuple
    params: dict = field(default_factory=dict)
    dim_cs: int = 1

    @property
    def dim_cu(self):
        return self.dim - self.dim_cs

    @property
    def is_linear(self):
        return all(isinstance(p, Linear) for p in self.pieces)

    def lift(self, x):
        """Forward rule on lifted coordinates (no reduction)."""
        X, single = _as_batch(x)
        for p in self.pieces:
            X = p.apply(X)
        return X[0] if single else X

    def __call__(self, x):
        return wrap(self.lift(x))

    def jacobian(self, x):
        X, single = _as_batch(x)
        J = None
        for p in self.pieces:
            Jp = p.jacobian(X)
            J = Jp if J is None else Jp @ J
            X = p.apply(X)
        J = np.array(J)
        return J[0] if single else J

    def inverse(self):
        return TorusMap(
            name=f"{self.name}^-1",
            dim=self.dim,
            pieces=tuple(p.inverted() for p in reversed(self.pieces)),
            params=dict(self.params),
            dim_cs=self.dim - self.dim_cs,
        )

    def with_split(self, dim_cs):
        if not 1 <= dim_cs <= self.dim - 1:
            raise ValidationError(f"dim_cs must lie in [1, {self.dim - 1}]")
        return TorusMap(self.name, self.dim, self.pieces, dict(self.params), dim_cs)


def evaluate(fmap: TorusMap, x):
    return fmap(x)


def differential(fmap: TorusMap, x):
    return fmap.jacobian(x)


def iterate_orbit(fmap: TorusMap, x, n: int, max_length: int = MAX_ORBIT_LENGTH):
    """Return the array (x, f(x), ..., f^n(x)); negative ``n`` walks backwards."""
    if abs(n) > max_length:
        raise OrbitLengthExceeded(f"|n| = {abs(n)} exceeds orbit cap {max_length}")
    g = fmap if n >= 0 else fmap.inverse()
    X, single = _as_batch(wrap(x))
    out = np.empty((abs(n) + 1,) + X.shape)
    out[0] = X
    for k in range(abs(n)):
        out[k + 1] = wrap(g.lift(out[k]))
    return out[:, 0] if single else out


def finite_difference_jacobian(fmap: TorusMap, x, step=1e-5):
    """Central differences of the lifted forward rule."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    cols = []
    for i in range(d):
        e = np.zeros(d)
        e[i] = step
        cols.append((fmap.lift(x + e) - fmap.lift(x - e)) / (2 * step))
    return np.stack(cols, axis=-1)


# --------------------------------------------------------------------------
# catalog

CAT2 = np.array([[2, 1], [1, 1]])
# symmetric, det 1, eigenvalues 3.247, 1.555, 0.198 (two expanding)
CAT3_U2 = np.array([[2, 1, 0], [1, 2, 1], [0, 1, 1]])
# inverse of CAT3_U2: eigenvalues 5.049, 0.643, 0.308 (one expanding)
CAT3 = np.array([[1, -1, 1], [-1, 2, -2], [1, -2, 3]])


def _linear_facts(A, dim_cs):
    mods = np.sort(np.abs(np.linalg.eigvals(np.asarray(A, dtype=float))))[::-1]
    return {
        "exponents": [float(v) for v in np.log(mods)],
        "dim_cs": dim_cs,
        "dominated": True,
        "ergodic": bool(np.all(np.abs(np.log(mods)) > 1e-12)),
        "source": "eigenvalue moduli (exact)",
    }


def _block(*blocks):
    blocks = [np.atleast_2d(b) for b in blocks]
    d = sum(b.shape[0] for b in blocks)
    out = np.zeros((d, d))
    i = 0
    for b in blocks:
        k = b.shape[0]
        out[i : i + k, i : i + k] = b
        i += k
    return out


@dataclass(frozen=True)
class CatalogEntry:
    identifier: str
    description: str
    build: Callable[..., TorusMap]
    defaults: dict
    facts: dict

    def construct(self, **params):
        unknown = set(params) - set(self.defaults)
        if unknown:
            raise ValidationError(f"{self.identifier}: unknown parameters {sorted(unknown)}")
        kw = {**self.defaults, **params}
        return self.build(**kw)


def _linear_entry(identifier, description, A, dim_cs):
    A = np.asarray(A)

    def build():
        return TorusMap(identifier, A.shape[0], (Linear(A),), {}, dim_cs)

    return CatalogEntry(identifier, description, build, {}, _linear_facts(A, dim_cs))


def _cat2_shear(eps=0.05):
    # A o s with s(x, y) = (x, y + eps sin 2 pi x)
    return TorusMap("cat2shear", 2, (Shear(1, 0, eps), Linear(CAT2)), {"eps": eps}, 1)


def _cat2_conj(a=0.3):
    # h o A o h^-1 with h the shear (x, y + a sin 2 pi x); Anosov for every a,
    # bundles rotate with amplitude controlled by a
    h = Shear(1, 0, a)
    return TorusMap("cat2conj", 2, (h.inverted(), Linear(CAT2), h), {"a": a}, 1)


def _cat3u2_shear(eps=0.03):
    pieces = (Shear(2, 0, eps), Shear(0, 1, eps), Linear(CAT3_U2))
    return TorusMap("cat3u2shear", 3, pieces, {"eps": eps}, 1)


def _cat3_shear(eps=0.03):
    pieces = (Shear(1, 0, eps), Linear(CAT3))
    return TorusMap("cat3shear", 3, pieces, {"eps": eps}, 2)


def _shear2(eps=0.0):
    return TorusMap("shear2", 2, (Shear(1, 0, eps),), {"eps": eps}, 1)


def _identity(d=2):
    return TorusMap(f"id{d}", d, (Linear(np.eye(d)),), {}, 1)


_NONLINEAR_FACTS = {"dominated": True, "source": "artifact choice; no closed-form exponents"}

_ENTRIES = [
    _linear_entry("cat2", "Arnold cat map [[2,1],[1,1]] on T^2", CAT2, 1),
    _linear_entry("cat3", "hyperbolic automorphism of T^3 with one expanding direction", CAT3, 2),
    _linear_entry("cat3u2", "hyperbolic automorphism of T^3 with a 2-dim expanding bundle", CAT3_U2, 1),
    _linear_entry("cat2xcat2", "cat map x cat map on T^4 (2-dim expanding bundle)", _block(CAT2, CAT2), 2),
    _linear_entry("cat2xid", "cat map x identity circle on T^3 (non-ergodic control)", _block(CAT2, 1), 2),
    CatalogEntry("cat2shear", "cat map composed with a vertical shear of amplitude eps",
                 _cat2_shear, {"eps": 0.05}, dict(_NONLINEAR_FACTS, dim_cs=1)),
    CatalogEntry("cat2conj", "cat map conjugated by a shear of amplitude a (rotating bundles)",
                 _cat2_conj, {"a": 0.3}, dict(_NONLINEAR_FACTS, dim_cs=1,
                                              exponents=_linear_facts(CAT2, 1)["exponents"])),
    CatalogEntry("cat3u2shear", "cat3u2 composed with two shears of amplitude eps",
                 _cat3u2_shear, {"eps": 0.03}, dict(_NONLINEAR_FACTS, dim_cs=1)),
    CatalogEntry("cat3shear", "cat3 composed with a shear of amplitude eps",
                 _cat3_shear, {"eps": 0.03}, dict(_NONLINEAR_FACTS, dim_cs=2)),
    CatalogEntry("shear2", "pure shear (x, y + eps sin 2 pi x); identity at eps = 0",
                 _shear2, {"eps": 0.0}, {"dominated": False, "dim_cs": 1}),
    CatalogEntry("id2", "identity of T^2", lambda d=2: _identity(d), {"d": 2},
                 {"dominated": False, "dim_cs": 1, "exponents": [0.0, 0.0]}),
]


def catalog():
    return list(_ENTRIES)


def lookup(identifier: str) -> CatalogEntry:
    for e in _ENTRIES:
        if e.identifier == identifier:
            return e
    raise UnknownIdentifier(f"unknown system identifier {identifier!r}")


def build_system(identifier: str, **params) -> TorusMap:
    return lookup(identifier).construct(**params)
