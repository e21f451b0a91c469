"""Iterated local unstable disks and their boundary geometry.

A ``Disk`` is a polyline (k = 1) or a triangle mesh (k = 2) in lifted
coordinates of R^d.  Every vertex remembers its parameter on the seed disk,
so refinement inserts new vertices by pushing the seed parameter forward
through f^n instead of interpolating in the embedding.

Measures: ``volume`` is arclength/area, ``boundary_measure`` is the counting
measure on the two endpoints (k = 1) or boundary arclength (k = 2).
Intrinsic distances are arclength along the polyline (exact) or shortest
paths on the edge graph augmented with one unfolded diagonal per interior
edge (an upper bound of the geodesic distance).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from . import rng
from .errors import MeshBlowup, UnsupportedDimension, ValidationError
from .splitting import SplittingFrame
from .system import TorusMap, torus_delta, wrap

DEFAULT_H_MAX = 0.05
MAX_VERTICES = 10**7
CHART_CAP = 0.4
SOURCE_BLOCK = 64
SAG_RATIO = 1.0
MIN_EDGE = 1e-13
SAG_NOISE = 100 * np.finfo(float).eps


@dataclass(frozen=True)
class SeedChart:
    """Flat parameterization u -> center + basis @ u of the seed disk."""

    center: np.ndarray
    basis: np.ndarray
    radius: float

    def embed(self, U):
        return self.center + np.atleast_2d(U) @ self.basis.T


def _edge_keys(a, b, n):
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    return lo.astype(np.int64) * n + hi


@dataclass(frozen=True, eq=False)
class Disk:
    k: int
    vertices: np.ndarray
    params: np.ndarray
    simplices: np.ndarray
    basepoint: int
    generation: int
    chart: SeedChart = field(repr=False)

    @property
    def n_vertices(self):
        return len(self.vertices)

    # ---- combinatorics -------------------------------------------------

    @cached_property
    def _edge_data(self):
        """(edges (E,2), tri_edge (T,3) or None, edge triangle counts)."""
        n = self.n_vertices
        if self.k == 1:
            edges = self.simplices
            return edges, None, np.ones(len(edges), dtype=int)
        tri = self.simplices
        a = tri[:, [0, 1, 2]].ravel()
        b = tri[:, [1, 2, 0]].ravel()
        keys = _edge_keys(a, b, n)
        uniq, inv, counts = np.unique(keys, return_inverse=True, return_counts=True)
        edges = np.stack([uniq // n, uniq % n], axis=1)
        return edges, inv.reshape(-1, 3), counts

    @property
    def edges(self):
        return self._edge_data[0]

    @cached_property
    def edge_lengths(self):
        e = self.edges
        return np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1)

    def is_manifold(self):
        """Every edge lies in one (boundary) or two (interior) triangles."""
        if self.k == 1:
            return True
        counts = self._edge_data[2]
        return bool(np.all((counts == 1) | (counts == 2)))

    @cached_property
    def boundary_edges(self):
        if self.k == 1:
            return np.zeros((0, 2), dtype=int)
        return self.edges[self._edge_data[2] == 1]

    @cached_property
    def boundary_vertices(self):
        if self.k == 1:
            return np.array([0, self.n_vertices - 1])
        return np.unique(self.boundary_edges)

    def boundary_loop(self):
        """Boundary vertices in cyclic order (k = 2) or the two endpoints (k = 1)."""
        if self.k == 1:
            return self.boundary_vertices
        be = self.boundary_edges
        nbr = {}
        for a, b in be:
            nbr.setdefault(int(a), []).append(int(b))
            nbr.setdefault(int(b), []).append(int(a))
        start = int(be[0, 0])
        loop, prev, cur = [start], None, start
        while True:
            nxt = [v for v in nbr[cur] if v != prev]
            if not nxt or nxt[0] == start:
                break
            prev, cur = cur, nxt[0]
            loop.append(cur)
        return np.array(loop)

    # ---- measures ------------------------------------------------------

    @cached_property
    def arclength(self):
        """Cumulative arclength along the polyline (k = 1)."""
        if self.k != 1:
            raise UnsupportedDimension("arclength is defined for polylines only")
        return np.concatenate([[0.0], np.cumsum(self.edge_lengths)])

    @cached_property
    def triangle_areas(self):
        tri = self.simplices
        u = self.vertices[tri[:, 1]] - self.vertices[tri[:, 0]]
        v = self.vertices[tri[:, 2]] - self.vertices[tri[:, 0]]
        uu, vv, uv = (u * u).sum(1), (v * v).sum(1), (u * v).sum(1)
        return 0.5 * np.sqrt(np.maximum(uu * vv - uv * uv, 0.0))

    @property
    def volume(self):
        return float(self.edge_lengths.sum()) if self.k == 1 else float(self.triangle_areas.sum())

    @property
    def boundary_measure(self):
        if self.k == 1:
            return 2.0
        be = self.boundary_edges
        return float(np.linalg.norm(self.vertices[be[:, 1]] - self.vertices[be[:, 0]], axis=1).sum())

    @cached_property
    def vertex_weights(self):
        """Lumped m_D: half the adjacent edge lengths (k=1), a third of the
        adjacent triangle areas (k=2)."""
        w = np.zeros(self.n_vertices)
        if self.k == 1:
            half = 0.5 * self.edge_lengths
            np.add.at(w, self.simplices[:, 0], half)
            np.add.at(w, self.simplices[:, 1], half)
        else:
            third = self.triangle_areas / 3.0
            for j in range(3):
                np.add.at(w, self.simplices[:, j], third)
        return w

    @cached_property
    def boundary_weights(self):
        """Lumped m_dD on vertices (zero away from the boundary)."""
        w = np.zeros(self.n_vertices)
        if self.k == 1:
            w[self.boundary_vertices] = 1.0
            return w
        be = self.boundary_edges
        half = 0.5 * np.linalg.norm(self.vertices[be[:, 1]] - self.vertices[be[:, 0]], axis=1)
        np.add.at(w, be[:, 0], half)
        np.add.at(w, be[:, 1], half)
        return w

    @cached_property
    def edge_length_range(self):
        L = self.edge_lengths
        return float(L.min()), float(L.max())

    # ---- metric --------------------------------------------------------

    @cached_property
    def graph(self):
        """Symmetric sparse distance graph: mesh edges plus unfolded diagonals."""
        n = self.n_vertices
        e, L = self.edges, self.edge_lengths
        rows, cols, vals = [e[:, 0], e[:, 1]], [e[:, 1], e[:, 0]], [L, L]
        if self.k == 2:
            c, dd, w = self._diagonals()
            rows += [c, dd]
            cols += [dd, c]
            vals += [w, w]
        r, c, w = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
        # keep the shortest entry per vertex pair; scipy would sum duplicates,
        # and csgraph reads stored zeros as missing edges
        order = np.lexsort((w, c, r))
        r, c, w = r[order], c[order], w[order]
        first = np.ones(len(r), dtype=bool)
        first[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
        r, c, w = r[first], c[first], np.maximum(w[first], np.finfo(float).tiny)
        return coo_matrix((w, (r, c)), shape=(n, n)).tocsr()

    def _diagonals(self):
        edges, tri_edge, counts = self._edge_data
        tri = self.simplices
        opp = tri[:, [2, 0, 1]].ravel()
        eid = tri_edge.ravel()
        order = np.argsort(eid, kind="stable")
        eid_s, opp_s = eid[order], opp[order]
        first = np.ones(len(eid_s), dtype=bool)
        first[1:] = eid_s[1:] != eid_s[:-1]
        starts = np.flatnonzero(first)
        interior = counts[eid_s[starts]] == 2
        s = starts[interior]
        ids = eid_s[s]
        c, d = opp_s[s], opp_s[s + 1]
        a, b = edges[ids, 0], edges[ids, 1]
        V = self.vertices

        def dist(p, q):
            return np.linalg.norm(V[p] - V[q], axis=1)

        lab, lac, lbc, lad, lbd = dist(a, b), dist(a, c), dist(b, c), dist(a, d), dist(b, d)
        lab_safe = np.where(lab > 0, lab, 1.0)
        xc = (lac**2 - lbc**2 + lab**2) / (2 * lab_safe)
        yc = np.sqrt(np.maximum(lac**2 - xc**2, 0.0))
        xd = (lad**2 - lbd**2 + lab**2) / (2 * lab_safe)
        yd = -np.sqrt(np.maximum(lad**2 - xd**2, 0.0))
        denom = yc - yd
        ok = (denom > 0) & (lab > 0)
        xcross = np.where(ok, xc + (xd - xc) * yc / np.where(ok, denom, 1.0), -1.0)
        ok &= (xcross > 0) & (xcross < lab)
        w = np.hypot(xd - xc, yd - yc)
        return c[ok], d[ok], w[ok]

    def _without_cache(self, **changes):
        kw = dict(k=self.k, vertices=self.vertices, params=self.params, simplices=self.simplices,
                  basepoint=self.basepoint, generation=self.generation, chart=self.chart)
        kw.update(changes)
        return Disk(**kw)


# --------------------------------------------------------------------------
# construction


def _ring_mesh(radius, resolution):
    """Concentric-ring triangulation of the round disk; boundary = outer ring."""
    m = max(1, int(np.ceil(radius / resolution)))
    pts = [np.zeros((1, 2))]
    rings = [np.array([0])]
    count = 1
    for j in range(1, m + 1):
        nj = 6 * j
        ang = 2 * np.pi * np.arange(nj) / nj
        pts.append(radius * j / m * np.stack([np.cos(ang), np.sin(ang)], axis=1))
        rings.append(np.arange(count, count + nj))
        count += nj
    P = np.concatenate(pts)
    tris = []
    inner = rings[1]
    for i in range(6):
        tris.append((0, inner[i], inner[(i + 1) % 6]))
    for j in range(2, m + 1):
        A, B = rings[j - 1], rings[j]
        na, nb = len(A), len(B)
        ia = ib = 0
        while ia < na or ib < nb:
            # advance along whichever ring has the smaller next angle
            next_a = (ia + 1) / na
            next_b = (ib + 1) / nb
            if ib < nb and (ia >= na or next_b <= next_a):
                tris.append((A[ia % na], B[ib % nb], B[(ib + 1) % nb]))
                ib += 1
            else:
                tris.append((A[ia % na], B[ib % nb], A[(ia + 1) % na]))
                ia += 1
    return P, np.array(tris, dtype=np.int64)


def flat_disk(center, basis, r0, resolution, generation=0):
    """Round k-disk (k = basis columns) of radius r0 tangent to span(basis)."""
    basis = np.asarray(basis, dtype=float)
    center = np.asarray(center, dtype=float)
    k = basis.shape[1]
    chart = SeedChart(center, basis, float(r0))
    if k == 1:
        m = max(1, int(np.ceil(r0 / resolution)))
        U = np.linspace(-r0, r0, 2 * m + 1)[:, None]
        simp = np.stack([np.arange(2 * m), np.arange(1, 2 * m + 1)], axis=1)
        base = m
    elif k == 2:
        U, simp = _ring_mesh(r0, resolution)
        base = 0
    else:
        raise UnsupportedDimension(f"disks of dimension {k} are not supported (k <= 2)")
    return Disk(k, chart.embed(U), U, simp, base, generation, chart)


def seed_disk(fmap: TorusMap, frame: SplittingFrame, r0=0.01, resolution=None) -> Disk:
    """Flat surrogate of the local unstable manifold: radius r0 tangent to E^cu."""
    if r0 > 0.05 or r0 <= 0:
        raise ValidationError("seed radius must lie in (0, 0.05]")
    k = frame.cu_basis.shape[1]
    if k > 2:
        raise UnsupportedDimension(f"dim E^cu = {k} > 2 is not supported")
    resolution = resolution or r0 / 10
    return flat_disk(frame.point, frame.cu_basis, r0, resolution)


# --------------------------------------------------------------------------
# iteration and refinement


def _push_from_seed(fmap, disk, U, anchors):
    """f^n of seed parameters, placed in the lift nearest to ``anchors``.

    The orbit is reduced mod 1 at every step so that no precision is lost
    to large lifted coordinates.
    """
    X = disk.chart.embed(U)
    for _ in range(disk.generation):
        X = wrap(fmap.lift(X))
    return anchors + torus_delta(anchors, X)


def _refine_polyline(fmap, disk, h_max, max_vertices):
    while True:
        L = disk.edge_lengths
        long = np.flatnonzero(L > h_max)
        if long.size == 0:
            return disk
        if disk.n_vertices + long.size > max_vertices:
            raise MeshBlowup(f"vertex count would exceed {max_vertices}")
        Um = 0.5 * (disk.params[long] + disk.params[long + 1])
        mid = 0.5 * (disk.vertices[long] + disk.vertices[long + 1])
        Xm = _push_from_seed(fmap, disk, Um, mid)
        V = np.insert(disk.vertices, long + 1, Xm, axis=0)
        U = np.insert(disk.params, long + 1, Um, axis=0)
        n = len(V)
        simp = np.stack([np.arange(n - 1), np.arange(1, n)], axis=1)
        base = disk.basepoint + int(np.sum(long < disk.basepoint))
        disk = disk._without_cache(vertices=V, params=U, simplices=simp, basepoint=base)


def _edge_altitudes(disk):
    """Smallest altitude onto each edge among its adjacent triangles."""
    edges, tri_edge, _ = disk._edge_data
    L = disk.edge_lengths
    alt = np.full(len(edges), np.inf)
    A2 = 2.0 * disk.triangle_areas
    for j in range(3):
        e = tri_edge[:, j]
        np.minimum.at(alt, e, A2 / np.where(L[e] > 0, L[e], np.inf))
    return alt


def _refine_mesh(fmap, disk, h_max, max_vertices, sag_ratio=None):
    sag_ratio = SAG_RATIO if sag_ratio is None else sag_ratio
    check_sag = sag_ratio > 0 and not fmap.is_linear
    while True:
        edges, tri_edge, _ = disk._edge_data
        L = disk.edge_lengths
        chord = 0.5 * (disk.vertices[edges[:, 0]] + disk.vertices[edges[:, 1]])
        U_all = 0.5 * (disk.params[edges[:, 0]] + disk.params[edges[:, 1]])
        long = L > h_max
        X_all = None
        if check_sag:
            # thin triangles crumple once the surface bends out of their plane
            # by more than their width; split edges whose true midpoint sags
            # off the chord by a fraction of the adjacent altitude
            X_all = _push_from_seed(fmap, disk, U_all, chord)
            sag = np.linalg.norm(X_all - chord, axis=1)
            # f^n amplifies round-off by about the edge's own expansion factor;
            # sags below that level are noise, not curvature
            dU = np.linalg.norm(disk.params[edges[:, 1]] - disk.params[edges[:, 0]], axis=1)
            noise = SAG_NOISE * L / np.where(dU > 0, dU, np.inf) * np.maximum(1.0, np.abs(chord).max(1))
            long |= (sag > np.maximum(sag_ratio * _edge_altitudes(disk), noise)) & (L > MIN_EDGE)
        if not long.any():
            return disk
        n_new = int(long.sum())
        if disk.n_vertices + n_new > max_vertices:
            raise MeshBlowup(f"vertex count would exceed {max_vertices}")
        V0 = disk.n_vertices
        mid_index = np.full(len(edges), -1, dtype=np.int64)
        mid_index[long] = V0 + np.arange(n_new)
        Um = U_all[long]
        Xm = X_all[long] if X_all is not None else _push_from_seed(fmap, disk, Um, chord[long])
        V = np.concatenate([disk.vertices, Xm])
        U = np.concatenate([disk.params, Um])

        tri = disk.simplices
        mids = mid_index[tri_edge]  # local edge j joins v_j and v_{j+1}
        marks = mids >= 0
        nm = marks.sum(1)
        out = [tri[nm == 0]]
        rows = np.arange(len(tri))

        def rot(sel, s):
            r = rows[sel]
            idx = (s[:, None] + np.arange(3)[None, :]) % 3
            return tri[r[:, None], idx], mids[r[:, None], idx]

        sel = nm == 1
        if sel.any():
            s = np.argmax(marks[sel], axis=1)
            t, m = rot(sel, s)
            a, b, c, mab = t[:, 0], t[:, 1], t[:, 2], m[:, 0]
            out += [np.stack([a, mab, c], 1), np.stack([mab, b, c], 1)]
        sel = nm == 2
        if sel.any():
            unmarked = np.argmin(marks[sel], axis=1)
            s = (unmarked + 1) % 3
            t, m = rot(sel, s)
            a, b, c, mab, mbc = t[:, 0], t[:, 1], t[:, 2], m[:, 0], m[:, 1]
            out.append(np.stack([mab, b, mbc], 1))
            d1 = np.linalg.norm(V[a] - V[mbc], axis=1)
            d2 = np.linalg.norm(V[mab] - V[c], axis=1)
            use1 = d1 <= d2
            q1 = np.concatenate([np.stack([a, mab, mbc], 1)[use1], np.stack([a, mab, c], 1)[~use1]])
            q2 = np.concatenate([np.stack([a, mbc, c], 1)[use1], np.stack([mab, mbc, c], 1)[~use1]])
            out += [q1, q2]
        sel = nm == 3
        if sel.any():
            t, m = tri[sel], mids[sel]
            a, b, c = t[:, 0], t[:, 1], t[:, 2]
            mab, mbc, mca = m[:, 0], m[:, 1], m[:, 2]
            out += [np.stack([a, mab, mca], 1), np.stack([mab, b, mbc], 1),
                    np.stack([mca, mbc, c], 1), np.stack([mab, mbc, mca], 1)]
        disk = disk._without_cache(vertices=V, params=U, simplices=np.concatenate(out))


def refine(fmap: TorusMap, disk: Disk, h_max=DEFAULT_H_MAX, max_vertices=MAX_VERTICES,
           sag_ratio=None) -> Disk:
    """Split edges longer than h_max; on meshes of nonlinear maps also split
    edges whose midpoint sags off the chord by more than ``sag_ratio`` times
    the adjacent triangle altitude."""
    if disk.k == 1:
        return _refine_polyline(fmap, disk, h_max, max_vertices)
    return _refine_mesh(fmap, disk, h_max, max_vertices, sag_ratio)


def iterate_disk(fmap: TorusMap, disk: Disk, steps=1, h_max=DEFAULT_H_MAX,
                 max_vertices=MAX_VERTICES, sag_ratio=None) -> Disk:
    """Apply f vertex-wise ``steps`` times, refining after every step.

    After each step the whole disk is translated by the integer vector that
    brings the basepoint back into [0, 1)^d.  Lifts of torus maps commute
    with integer translations up to an integer vector, so the geometry is
    unchanged while coordinates stay small.
    """
    if steps < 1:
        raise ValidationError("steps must be >= 1")
    for _ in range(steps):
        V = fmap.lift(disk.vertices)
        V = V - np.floor(V[disk.basepoint])
        disk = disk._without_cache(vertices=V, generation=disk.generation + 1)
        disk = refine(fmap, disk, h_max, max_vertices, sag_ratio)
    return disk


# --------------------------------------------------------------------------
# distances, visibility, Fubini


def intrinsic_distances(disk: Disk, source, limit=np.inf):
    """Intrinsic distances from vertex ``source`` (or an array of sources)."""
    src = np.atleast_1d(source)
    if disk.k == 1:
        s = disk.arclength
        D = np.abs(s[None, :] - s[src][:, None])
        D[D >= limit] = np.inf
    else:
        D = dijkstra(disk.graph, directed=False, indices=src, limit=limit)
    return D[0] if np.ndim(source) == 0 else D


def distance_to_boundary(disk: Disk):
    if disk.k == 1:
        s = disk.arclength
        return np.minimum(s, s[-1] - s)
    return dijkstra(disk.graph, directed=False, indices=disk.boundary_vertices, min_only=True)


@dataclass(frozen=True)
class BoundaryVisibility:
    theta: np.ndarray
    delta: float
    h: float
    good_fraction: float
    bad_mass: float


@dataclass(frozen=True)
class FubiniResult:
    lhs: float
    rhs_bound: float
    identity_rhs: float
    K: float
    boundary_measure: float

    @property
    def relative_gap(self):
        scale = max(abs(self.lhs), abs(self.identity_rhs), 1e-300)
        return abs(self.lhs - self.identity_rhs) / scale


def _polyline_pieces(L, delta):
    """Breakpoints of theta(s) = [s < delta] + [L - s < delta] on [0, L]."""
    cuts = np.unique(np.clip([0.0, delta, L - delta, L], 0.0, L))
    mids = 0.5 * (cuts[1:] + cuts[:-1])
    vals = (mids < delta).astype(float) + ((L - mids) < delta).astype(float)
    return np.diff(cuts), vals


def _boundary_hits(disk, delta):
    """Yield (boundary vertex block, distance block) with distances < delta."""
    B = disk.boundary_vertices
    for i in range(0, len(B), SOURCE_BLOCK):
        blk = B[i : i + SOURCE_BLOCK]
        yield blk, dijkstra(disk.graph, directed=False, indices=blk, limit=delta)


def theta(disk: Disk, delta: float, h: float = 0.5) -> BoundaryVisibility:
    """Boundary measure visible within intrinsic distance delta of each vertex."""
    if delta <= 0:
        raise ValidationError("delta must be positive")
    if disk.k == 1:
        s = disk.arclength
        L = s[-1]
        th = (s < delta).astype(float) + ((L - s) < delta).astype(float)
        lengths, vals = _polyline_pieces(L, delta)
        bad = float(lengths[vals >= h].sum())
        return BoundaryVisibility(th, delta, h, 1.0 - bad / L, bad)
    th = np.zeros(disk.n_vertices)
    wb = disk.boundary_weights
    for blk, D in _boundary_hits(disk, delta):
        th += ((D < delta) * wb[blk][:, None]).sum(0)
    w = disk.vertex_weights
    bad = float(w[th >= h].sum())
    return BoundaryVisibility(th, delta, h, 1.0 - bad / w.sum(), bad)


def fubini_check(disk: Disk, delta: float) -> FubiniResult:
    """Both sides of the swap int theta dm_D = int m_D(B_delta(y)) dm_dD(y),
    and the bound K |m_dD| with K the largest boundary-ball volume."""
    if disk.k == 1:
        L = disk.volume
        lengths, vals = _polyline_pieces(L, delta)
        lhs = float((lengths * vals).sum())
        balls = np.array([min(delta, L), min(delta, L)])
        identity = float(balls.sum())
        K = float(balls.max())
        return FubiniResult(lhs, K * 2.0, identity, K, 2.0)
    w, wb = disk.vertex_weights, disk.boundary_weights
    th = np.zeros(disk.n_vertices)
    balls = []
    for blk, D in _boundary_hits(disk, delta):
        hit = D < delta
        th += (hit * wb[blk][:, None]).sum(0)
        balls.append((hit * w[None, :]).sum(1))
    balls = np.concatenate(balls)
    lhs = float((th * w).sum())
    identity = float((balls * wb[disk.boundary_vertices]).sum())
    K = float(balls.max())
    return FubiniResult(lhs, K * disk.boundary_measure, identity, K, disk.boundary_measure)


# --------------------------------------------------------------------------
# span


@dataclass(frozen=True)
class SpanEstimate:
    point: np.ndarray
    span: float
    resolution: float
    capped: bool


def dyadic_span(dist, cap=CHART_CAP, levels=12):
    """Largest dyadic delta in [0, cap] strictly below ``dist`` (bisection)."""
    dist = np.asarray(dist, dtype=float)
    lo = np.zeros_like(dist)
    hi = np.full_like(dist, cap)
    capped = dist > cap
    for _ in range(levels):
        mid = 0.5 * (lo + hi)
        inside = dist > mid
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return np.where(capped, cap, lo), cap / 2**levels, capped


def span_at(disk: Disk, vertex: int, cap=CHART_CAP, levels=12) -> SpanEstimate:
    dist = distance_to_boundary(disk)[vertex]
    s, res, capped = dyadic_span(dist, cap, levels)
    return SpanEstimate(disk.vertices[vertex], float(s), res, bool(capped))


def sample_spans(disk: Disk, count: int, seed=0, cap=CHART_CAP, levels=12):
    """Spans at m_D-random points of the disk."""
    g = rng.stream(seed, "diskgrowth.span", disk.generation)
    if disk.k == 1:
        L = disk.volume
        s = g.random(count) * L
        dist = np.minimum(s, L - s)
    else:
        w = disk.vertex_weights
        idx = g.choice(disk.n_vertices, size=count, p=w / w.sum())
        dist = distance_to_boundary(disk)[idx]
    spans, res, _ = dyadic_span(dist, cap, levels)
    return spans, res


# --------------------------------------------------------------------------
# series


SERIES_COLUMNS = ("n", "volume", "boundary_measure", "good_fraction", "chebyshev_bound",
                  "span_q25", "span_q50", "span_q75")


@dataclass
class GrowthRow:
    n: int
    volume: float
    boundary_measure: float
    good_fraction: float
    chebyshev_bound: float
    span_q25: float
    span_q50: float
    span_q75: float
    bad_mass: float = 0.0
    K: float = 0.0
    fubini_lhs: float = 0.0
    basepoint_span: float = 0.0
    n_vertices: int = 0

    @property
    def chebyshev_ok(self):
        return self.bad_mass <= self.K / self._h * self.boundary_measure * (1 + 1e-12) + 1e-300

    _h: float = field(default=1.0, repr=False)


def measure_disk(disk: Disk, delta, h, span_samples=200, seed=0, cap=CHART_CAP) -> GrowthRow:
    vis = theta(disk, delta, h)
    fub = fubini_check(disk, delta)
    spans, _ = sample_spans(disk, span_samples, seed, cap)
    q25, q50, q75 = np.quantile(spans, [0.25, 0.5, 0.75])
    cheb = fub.K / h * disk.boundary_measure / disk.volume
    return GrowthRow(disk.generation, disk.volume, disk.boundary_measure, vis.good_fraction,
                     float(cheb), float(q25), float(q50), float(q75), vis.bad_mass, fub.K,
                     fub.lhs, span_at(disk, disk.basepoint, cap).span, disk.n_vertices, _h=h)


def grow(fmap: TorusMap, disk: Disk, N: int, delta=0.05, h=0.5, h_max=DEFAULT_H_MAX,
         max_vertices=MAX_VERTICES, span_samples=200, seed=0, cap=CHART_CAP, keep_disks=False,
         sag_ratio=None):
    """Rows for generations 0..N (and optionally the disks themselves)."""
    rows, disks = [measure_disk(disk, delta, h, span_samples, seed, cap)], [disk]
    for _ in range(N):
        disk = iterate_disk(fmap, disk, 1, h_max, max_vertices, sag_ratio)
        rows.append(measure_disk(disk, delta, h, span_samples, seed, cap))
        if keep_disks:
            disks.append(disk)
    return (rows, disks) if keep_disks else rows


def good_fraction_series(fmap, seed, delta, h, N, **kw):
    return grow(fmap, seed, N, delta, h, **kw)


def span_series(fmap, seed, N, **kw):
    kw.setdefault("delta", 0.05)
    return grow(fmap, seed, N, **kw)


# --------------------------------------------------------------------------
# file formats


def write_mesh(disk: Disk, path):
    """Plain-text mesh: header, vertices, simplices, boundary index section."""
    with open(path, "w") as fh:
        fh.write(f"{disk.k} {disk.vertices.shape[1]} {disk.n_vertices} "
                 f"{len(disk.simplices)} {disk.generation}\n")
        for v in disk.vertices:
            fh.write(" ".join(repr(float(c)) for c in v) + "\n")
        for s in disk.simplices:
            fh.write(" ".join(str(int(i)) for i in s) + "\n")
        loop = disk.boundary_loop()
        fh.write(f"boundary {len(loop)}\n")
        fh.write(" ".join(str(int(i)) for i in loop) + "\n")


def read_mesh(path):
    """Return (k, generation, vertices, simplices, boundary) from ``write_mesh`` output."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    k, d, nv, ns, gen = (int(t) for t in lines[0].split())
    V = np.array([[float(t) for t in ln.split()] for ln in lines[1 : 1 + nv]]).reshape(nv, d)
    S = np.array([[int(t) for t in ln.split()] for ln in lines[1 + nv : 1 + nv + ns]],
                 dtype=np.int64).reshape(ns, k + 1)
    tag, nb = lines[1 + nv + ns].split()
    if tag != "boundary":
        raise ValidationError("missing boundary section")
    B = np.array([int(t) for t in lines[2 + nv + ns].split()], dtype=np.int64)
    if len(B) != int(nb):
        raise ValidationError("boundary section length mismatch")
    return k, gen, V, S, B


def write_series_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SERIES_COLUMNS)
        for r in rows:
            w.writerow([r.n] + [repr(float(getattr(r, c))) for c in SERIES_COLUMNS[1:]])
