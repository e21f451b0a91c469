"""Small batched linear-algebra kernels: frames, principal angles, compounds."""
from itertools import combinations
from math import comb

import numpy as np


def orthonormalize(V):
    """QR of a batch of frames (..., d, k) with a positive diagonal in R."""
    Q, R = np.linalg.qr(V)
    s = np.sign(np.diagonal(R, axis1=-2, axis2=-1))
    s = np.where(s == 0, 1.0, s)
    return Q * s[..., None, :], R * s[..., :, None]


def grassmann_distance(Q1, Q2):
    """Largest principal angle between span(Q1) and span(Q2) (same dimension).

    Uses the sine form ||(I - Q1 Q1^T) Q2||_2, accurate for tiny angles.
    """
    resid = Q2 - Q1 @ (np.swapaxes(Q1, -1, -2) @ Q2)
    s = np.linalg.norm(resid, ord=2, axis=(-2, -1))
    return np.arcsin(np.clip(s, 0.0, 1.0))


def min_principal_angle(Q1, Q2):
    """Smallest principal angle between two subspaces given orthonormal bases."""
    c = np.linalg.svd(np.swapaxes(Q1, -1, -2) @ Q2, compute_uv=False)
    return np.arccos(np.clip(c.max(axis=-1), -1.0, 1.0))


def subspace_volume(Q1, Q2):
    """|det [Q1 Q2]| for complementary subspaces: product of sines of principal angles."""
    return np.abs(np.linalg.det(np.concatenate([Q1, Q2], axis=-1)))


_INDEX_CACHE = {}


def _subsets(k, j):
    key = (k, j)
    if key not in _INDEX_CACHE:
        _INDEX_CACHE[key] = list(combinations(range(k), j))
    return _INDEX_CACHE[key]


def compound(B, j):
    """j-th compound matrix (matrix of j x j minors) of a batch (..., k, k).

    Compounds are multiplicative, so the compound of a cocycle product is
    the product of compounds; its operator norm is ||wedge^j B||.
    """
    B = np.asarray(B, dtype=float)
    k = B.shape[-1]
    lead = B.shape[:-2]
    if j == 0:
        return np.ones(lead + (1, 1))
    if j == 1:
        return B
    rows = _subsets(k, j)
    c = comb(k, j)
    out = np.empty(lead + (c, c))
    for a, r in enumerate(rows):
        Br = B[..., list(r), :]
        for b, s in enumerate(rows):
            out[..., a, b] = np.linalg.det(Br[..., :, list(s)])
    return out


class LogCompoundAccumulator:
    """Accumulates log ||wedge^j (B_{n-1} ... B_0)|| for j = 0..k in log space.

    Each compound product is rescaled every step, so arbitrarily long
    cocycles never overflow.  The top compound (the determinant) is summed
    exactly as sum log|det B_i|.
    """

    def __init__(self, batch, k):
        self.k = k
        self.steps = 0
        self.logdet = np.zeros(batch)
        self.prod = {j: np.broadcast_to(np.eye(comb(k, j)), (batch, comb(k, j), comb(k, j))).copy()
                     for j in range(1, k)}
        self.logscale = {j: np.zeros(batch) for j in range(1, k)}

    def push(self, B):
        with np.errstate(divide="ignore"):
            self.logdet += np.log(np.abs(np.linalg.det(B)))
        for j in range(1, self.k):
            P = compound(B, j) @ self.prod[j]
            s = np.abs(P).max(axis=(-2, -1))
            s = np.where(s > 0, s, 1.0)
            self.prod[j] = P / s[:, None, None]
            self.logscale[j] += np.log(s)
        self.steps += 1

    def log_norms(self):
        """Array (batch, k+1) of log ||wedge^j||, j = 0..k."""
        n = self.logdet.shape[0]
        out = np.zeros((n, self.k + 1))
        with np.errstate(divide="ignore"):
            for j in range(1, self.k):
                top = np.linalg.norm(self.prod[j], ord=2, axis=(-2, -1))
                out[:, j] = self.logscale[j] + np.log(top)
        out[:, self.k] = self.logdet
        return out

    def log_singular_values(self):
        """log sigma_1 >= ... >= log sigma_k of the accumulated product."""
        L = self.log_norms()
        return np.diff(L, axis=1)
