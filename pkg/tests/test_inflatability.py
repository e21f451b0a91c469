import numpy as np
import pytest

from domlab import rng
from domlab.errors import ValidationError
from domlab.inflatability import (Xi_n, Xi_series, check_bi_inflatable, check_inflatable,
                                  grid_points, perturbation_sweep, scan_horizons,
                                  subadditivity_table, xi_n)
from domlab.lyapunov import exponent_arrays
from domlab.splitting import estimate_frames, estimate_splitting
from domlab.system import CAT3_U2, build_system, iterate_orbit

from conftest import LAMBDA_CAT, sorted_eigs

MU = sorted_eigs(CAT3_U2)


def test_xi_cat(cat2):
    fr = estimate_splitting(cat2, [0.3, 0.2])
    assert abs(xi_n(cat2, fr, 1) - LAMBDA_CAT) <= 1e-12
    assert xi_n(cat2, fr, 0) == 0.0
    assert abs(xi_n(cat2, fr, 7, "cs") - 7 * LAMBDA_CAT) <= 1e-10


@pytest.mark.parametrize("side", ["cu", "cs"])
def test_xi_cocycle_additivity(cat3u2shear_map, side):
    f = cat3u2shear_map
    n, m = 4, 5
    X = rng.uniform_points(0, "t", 20, 3)
    g = f if side == "cu" else f.inverse()
    Y = iterate_orbit(g, X, n)[-1]
    a = xi_n(f, estimate_frames(f, X), n + m, side)
    b = xi_n(f, estimate_frames(f, X), n, side)
    c = xi_n(f, estimate_frames(f, Y), m, side)
    assert np.max(np.abs(a - b - c)) <= 1e-8


@pytest.fixture(scope="module")
def cat3u2shear_map():
    return build_system("cat3u2shear")


def test_Xi_oracles(cat2, cat3u2):
    assert Xi_n(cat2, 5).value == 0.0
    assert abs(Xi_n(cat3u2, 1, grid_resolution=4).value - np.log(MU[0])) <= 1e-12
    # cs side of cat3u2 is one-dimensional
    assert Xi_n(cat3u2, 3, "cs", grid_resolution=4).value == 0.0


def test_Xi_series_matches_single_horizons(cat3u2shear_map):
    series = Xi_series(cat3u2shear_map, [1, 3], grid_resolution=6)
    for n in (1, 3):
        assert series[n].value == Xi_n(cat3u2shear_map, n, grid_resolution=6).value
        assert series[n].skipped == 0 and series[n].total == 216


def test_grid_points():
    G = grid_points(2, 4)
    assert G.shape == (16, 2) and G.max() == 0.75 and G.min() == 0.0


@pytest.mark.parametrize("ident", ["cat3u2", "cat2xcat2", "cat3u2shear"])
def test_subadditivity(ident):
    xi, worst, tol = subadditivity_table(build_system(ident), nmax=3, grid_resolution=8)
    assert worst <= tol
    assert xi[0] == 0.0


def test_cat_inflatable(cat2):
    r = check_inflatable(cat2, "cu", 10, 1000)
    assert r.rhs == 0.0
    assert abs(r.lhs / 10 - LAMBDA_CAT) <= 1e-12
    assert abs(r.margin - 10 * LAMBDA_CAT) <= 1e-10
    assert r.inflatable and r.stderr >= 0 and r.samples == 1000


def test_product_map_is_not_cs_inflatable(cat2xid):
    r = check_inflatable(cat2xid, "cs", 10, 500, grid_resolution=6)
    assert abs(r.lhs - 10 * LAMBDA_CAT) <= 1e-9
    assert abs(r.rhs - 10 * LAMBDA_CAT) <= 1e-9
    assert abs(r.margin) <= 2 * r.stderr
    assert not r.inflatable


def test_cu2_linear_oracle(cat3u2):
    r = check_inflatable(cat3u2, "cu", 6, 200, grid_resolution=4)
    assert abs(r.lhs / 6 - np.log(MU[0] * MU[1])) <= 1e-9
    assert abs(r.rhs / 6 - np.log(MU[0])) <= 1e-9
    assert abs(r.margin / 6 - np.log(MU[1])) <= 1e-9


def test_cu1_collapse_cross_check(cat2shear):
    # lhs/n is the mean forward rate over the samples X; lambda_cu at f^n(x)
    # reads the same cocycle backwards, so the per-point values coincide
    n, samples = 10, 300
    r = check_inflatable(cat2shear, "cu", n, samples, seed=4)
    X = rng.uniform_points(4, "inflatability.samples.cu", samples, 2)
    Y = iterate_orbit(cat2shear, X, n)[-1]
    _, lcu, _, _ = exponent_arrays(cat2shear, Y, 1, n)
    assert abs(r.lhs / n - lcu.mean()) <= 1e-9


def test_monte_carlo_consistency(cat2shear):
    a = check_inflatable(cat2shear, "cu", 10, 10_000, seed=1)
    b = check_inflatable(cat2shear, "cu", 10, 100_000, seed=2)
    assert abs(a.lhs - b.lhs) <= 3 * np.hypot(a.stderr, b.stderr)


def test_bi_inflatability(cat2, cat2xid):
    rcs, rcu, both = check_bi_inflatable(cat2, 10, 10, 500)
    assert both and rcs.inflatable and rcu.inflatable
    rcs, rcu, both = check_bi_inflatable(cat2xid, 10, 10, 500, grid_resolution=6)
    assert rcu.inflatable and not rcs.inflatable and not both
    rcs, rcu, both = check_bi_inflatable(cat2, 0, 0, 500)
    assert rcs.margin == 0.0 and rcu.margin == 0.0 and not both


def test_validation(cat2):
    with pytest.raises(ValidationError):
        check_inflatable(cat2, "cu", 10, 99)
    with pytest.raises(ValidationError):
        check_inflatable(cat2, "up", 10, 100)
    with pytest.raises(ValidationError):
        check_inflatable(cat2, "cu", -1, 100)


def test_seeded_determinism(cat2shear):
    a = check_inflatable(cat2shear, "cu", 5, 400, seed=9)
    b = check_inflatable(cat2shear, "cu", 5, 400, seed=9)
    c = check_inflatable(cat2shear, "cu", 5, 400, seed=10)
    assert a.to_dict() == b.to_dict()
    assert a.lhs != c.lhs


def test_scan_horizons(cat2):
    reports, best = scan_horizons(cat2, "cu", [1, 4, 2], samples=200)
    assert [r.horizon for r in reports] == [1, 4, 2]
    assert best.horizon == 4


def test_perturbation_sweep():
    eps = [0.0, 0.005, 0.01]
    res = perturbation_sweep("cat2shear", eps, "cu", 5, 500)
    base = check_inflatable(build_system("cat2"), "cu", 5, 500)
    assert res.reports[0].margin == pytest.approx(base.margin, abs=1e-9)
    assert res.largest_positive == 0.01
    # the fitted constant bounds every pair of sweep points
    m = np.array([r.margin for r in res.reports])
    e = np.array(eps)
    pair = np.abs(m[:, None] - m[None, :]) <= res.lipschitz * np.abs(e[:, None] - e[None, :]) + 1e-12
    assert pair.all()
    assert all(r.inflatable for r in res.reports)
