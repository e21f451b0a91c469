import numpy as np
import pytest

from domlab import rng
from domlab.errors import NoConvergence, ValidationError
from domlab.linalg import grassmann_distance, min_principal_angle, orthonormalize
from domlab.splitting import (FrameBatch, domination_ratio, domination_ratios, estimate_cs,
                              estimate_cu, estimate_frames, estimate_splitting,
                              fit_domination, scan_splits)
from domlab.system import CAT2, CAT3_U2, build_system

TAU_CAT = (3 - np.sqrt(5)) / (3 + np.sqrt(5))


def eigenspace(A, which):
    """Orthonormal basis of the expanding ('u') or contracting ('s') eigenvectors."""
    w, V = np.linalg.eig(np.asarray(A, dtype=float))
    keep = np.abs(w) > 1 if which == "u" else np.abs(w) < 1
    Q, _ = np.linalg.qr(np.real(V[:, keep]))
    return Q


def test_cat_bundles_are_eigenvectors(cat2):
    x = [0.3, 0.6]
    cu = estimate_cu(cat2, x)
    cs = estimate_cs(cat2, x)
    assert cu.residual <= 1e-10
    assert grassmann_distance(cu.basis, eigenspace(CAT2, "u")) <= 1e-10
    assert grassmann_distance(cs.basis, eigenspace(CAT2, "s")) <= 1e-10
    fr = estimate_splitting(cat2, x)
    # the eigenvectors of a symmetric matrix are orthogonal
    assert abs(fr.angle - np.pi / 2) <= 1e-6


def test_two_dimensional_expanding_bundle(cat3u2):
    cu = estimate_cu(cat3u2, [0.1, 0.2, 0.3])
    assert cu.basis.shape == (3, 2)
    assert grassmann_distance(cu.basis, eigenspace(CAT3_U2, "u")) <= 1e-10


@pytest.mark.parametrize("dim_cu", [1])
def test_identity_has_no_splitting(dim_cu):
    f = build_system("id2")
    with pytest.raises(NoConvergence) as info:
        estimate_cu(f, [0.1, 0.2], dim_cu)
    assert info.value.residual > 1e-9
    with pytest.raises(NoConvergence):
        estimate_cs(f, [0.1, 0.2])


def test_bad_dimension(cat2):
    with pytest.raises(ValidationError):
        estimate_cu(cat2, [0.1, 0.2], 2)


def test_domination_ratio_oracle(cat2):
    fr = estimate_splitting(cat2, [0.2, 0.4])
    assert domination_ratio(cat2, fr, 0) == 1.0
    r1 = domination_ratio(cat2, fr, 1)
    assert abs(r1 - TAU_CAT) <= 1e-9
    r5, r6 = domination_ratio(cat2, fr, 5), domination_ratio(cat2, fr, 6)
    assert abs(r6 / r5 - TAU_CAT) <= 1e-8


def test_fit_domination_cat(cat2):
    X = rng.uniform_points(0, "test", 16, 2)
    est = fit_domination(cat2, estimate_frames(cat2, X), 10)
    assert abs(est.tau - TAU_CAT) <= 1e-3
    assert 0.9 <= est.C <= 1.1
    assert est.dominated and est.ratio_sup >= 0


def test_fit_domination_linear_eigen_oracle(cat3u2):
    mods = np.sort(np.abs(np.linalg.eigvals(CAT3_U2.astype(float))))
    inside = mods[mods < 1].max()
    outside = mods[mods > 1].min()
    X = rng.uniform_points(0, "test", 4, 3)
    est = fit_domination(cat3u2, estimate_frames(cat3u2, X), 8)
    assert abs(est.tau - inside / outside) <= 1e-6


def test_fit_domination_needs_three_horizons(cat2):
    with pytest.raises(ValidationError):
        fit_domination(cat2, estimate_frames(cat2, [[0.1, 0.1]]), 2)


@pytest.mark.parametrize("ident,params", [("shear2", {"eps": 0.1}), ("id2", {})])
def test_non_dominated_map_flagged(ident, params):
    # a parabolic shear separates directions only polynomially
    f = build_system(ident, **params)
    fb = estimate_frames(f, rng.uniform_points(0, "test", 8, 2))
    assert np.any(fb.residual > 1e-9)
    assert not fit_domination(f, fb, 10).dominated


def test_bundle_invariance_nonlinear(cat2shear):
    X = rng.uniform_points(1, "test.inv", 100, 2)
    fb = estimate_frames(cat2shear, X)
    fy = estimate_frames(cat2shear, cat2shear(X))
    pushed, _ = orthonormalize(cat2shear.jacobian(X) @ fb.cu)
    dist = grassmann_distance(pushed, fy.cu)
    assert np.all(dist <= 10 * np.maximum(fb.residual, fy.residual) + 1e-14)


def test_continuity_proxy(cat2shear):
    X = rng.uniform_points(2, "test.cont", 50, 2)
    g = rng.stream(2, "test.cont.dir")
    Y = X + 1e-3 * g.uniform(-1, 1, X.shape) / np.sqrt(2)
    a, b = estimate_frames(cat2shear, X), estimate_frames(cat2shear, Y)
    assert np.max(grassmann_distance(a.cu, b.cu)) <= 1e-1
    assert np.min(a.angle) > 0


def test_exchange_symmetry(cat2shear):
    x = [0.42, 0.17]
    cs = estimate_cs(cat2shear, x)
    cu_inv = estimate_cu(cat2shear.inverse(), x)
    assert np.array_equal(cs.basis, cu_inv.basis)
    assert cs.residual <= 2 * cu_inv.residual + 1e-300


def test_frame_invariants(cat2xid):
    fb = estimate_frames(cat2xid, rng.uniform_points(0, "t", 5, 3))
    fr = fb[0]
    assert fr.dim_cs + fr.dim_cu == 3
    for Q in (fr.cs_basis, fr.cu_basis):
        assert np.allclose(Q.T @ Q, np.eye(Q.shape[1]), atol=1e-10)
    sub = fb[np.array([1, 3])]
    assert isinstance(sub, FrameBatch) and len(sub) == 2
    back = FrameBatch.from_frames([fb[i] for i in range(len(fb))])
    assert np.array_equal(back.cu, fb.cu)


def test_scan_splits(cat2xid):
    # the neutral circle may join either side: both splits are dominated
    res = scan_splits(cat2xid, [0.1, 0.2, 0.3])
    assert set(res) == {1, 2}
    assert max(res.values()) <= 1e-9
    assert scan_splits(build_system("id2"), [0.1, 0.2])[1] > 1e-9


def test_domination_ratios_vectorized_matches_single(cat2shear):
    fb = estimate_frames(cat2shear, rng.uniform_points(4, "t", 6, 2))
    many = domination_ratios(cat2shear, fb, 3)
    one = [domination_ratio(cat2shear, fb[i], 3) for i in range(len(fb))]
    assert np.allclose(many, one, rtol=1e-12)
    assert np.all(min_principal_angle(fb.cs, fb.cu) > 0)
