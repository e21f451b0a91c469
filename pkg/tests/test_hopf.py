import numpy as np
import pytest

from domlab import rng
from domlab.errors import OrbitLengthExceeded, ValidationError
from domlab.hopf import (BirkhoffProfile, ObservableBank, cluster_components, convergence_fit,
                         default_bank, forward_averages, profile, profiles, stable_candidates,
                         stable_transfer_check, unstable_candidates, write_pairs_csv,
                         write_profiles_csv)
from domlab.splitting import estimate_splitting
from domlab.system import CAT2, TWO_PI, build_system

LOG_CONTRACT = float(np.log((3 - np.sqrt(5)) / 2))


def eig(which):
    w, V = np.linalg.eigh(CAT2.astype(float))
    return V[:, 0] if which == "s" else V[:, -1]


def test_default_bank():
    bank = default_bank(3)
    assert len(bank) == 9 and len(bank) >= 3
    X = rng.uniform_points(0, "t", 200, 3)
    slow = np.stack([phi(X) for phi in bank.functions], axis=1)
    assert np.allclose(bank.evaluate(X), slow, atol=1e-14)
    assert np.all(np.abs(slow) <= 1)
    with pytest.raises(ValidationError):
        ObservableBank(("a",), ())


def test_fixed_point_profile(cat2):
    p = profile(cat2, [0.0, 0.0], n=1000)
    vals = default_bank(2).evaluate(np.zeros((1, 2)))[0]
    assert np.array_equal(p.forward, vals) and np.array_equal(p.backward, vals)


def test_frozen_circle_is_exact(cat2xid):
    z = 0.3125
    p = profile(cat2xid, [0.1, 0.7, z], n=1000)
    # cos(2 pi x3) is the third bank entry
    assert p.forward[2] == np.cos(TWO_PI * z) and p.backward[2] == np.cos(TWO_PI * z)


def test_cat_profiles_mean_zero(cat2):
    X = rng.uniform_points(5, "t.hopf", 5, 2)
    for p in profiles(cat2, X, n=10**5):
        assert np.all(np.abs(p.vector) <= 3e-2)


def test_time_reversal_is_bitwise(cat2shear):
    X = rng.uniform_points(1, "t", 6, 2)
    ps = profiles(cat2shear, X, n=2000)
    bank = default_bank(2)
    fw_inv = forward_averages(cat2shear.inverse(), X, bank, 2000)
    assert np.array_equal(np.array([p.backward for p in ps]), fw_inv)


def test_profile_validation(cat2):
    with pytest.raises(ValidationError):
        profile(cat2, [0.1, 0.2], n=999)
    with pytest.raises(OrbitLengthExceeded):
        profile(cat2, [0.1, 0.2], n=2000, max_length=1500)


def _fake(point, vec, n=1000):
    vec = np.asarray(vec, dtype=float)
    return BirkhoffProfile(np.asarray(point, dtype=float), n, vec, vec)


def test_clustering_invariants():
    g = rng.stream(0, "t.cluster")
    profs = [_fake(g.random(2), g.uniform(-1, 1, 3)) for _ in range(60)]
    cl = cluster_components(profs, 0.5)
    V = np.array([p.vector for p in profs])
    assert np.all(np.abs(V - cl.centers[cl.assignment]).max(axis=1) <= 0.5)
    C = cl.centers
    gaps = np.abs(C[:, None] - C[None]).max(axis=-1) + np.eye(len(C)) * 10
    assert np.all(gaps > 0.5)
    assert np.isclose(cl.fractions.sum(), 1.0)
    assert cluster_components(profs, 2.0).count == 1


def test_clustering_ignores_input_order():
    g = rng.stream(1, "t.cluster")
    profs = [_fake(g.random(2), g.uniform(-1, 1, 2)) for _ in range(40)]
    a = cluster_components(profs, 0.3)
    perm = g.permutation(40)
    b = cluster_components([profs[i] for i in perm], 0.3)
    assert a.count == b.count
    assert np.array_equal(a.centers, b.centers)
    assert np.array_equal(a.assignment[perm], b.assignment)


def test_clustering_errors():
    with pytest.raises(ValidationError):
        cluster_components([])
    with pytest.raises(ValidationError):
        cluster_components([_fake([0, 0], [0, 0], 1000), _fake([0, 1], [0, 0], 2000)])


def test_product_map_has_many_components(cat2xid):
    X = rng.uniform_points(0, "t.prod", 60, 3)
    cl = cluster_components(profiles(cat2xid, X, n=5000), 0.05)
    assert cl.count >= 10


def test_transfer_identical_pair(cat2):
    x = np.array([0.2, 0.3])
    s = stable_transfer_check(cat2, [(x, x)], n=2000)
    assert s.converging == 1 and s.pairs[0].gap == 0.0 and s.pass_rate == 1.0


def test_transfer_along_eigenvectors(cat2):
    x = np.array([0.31, 0.17])
    # ten steps: rounding of y in the expanding direction stays far below d_k
    fit = convergence_fit(cat2, x, x + 1e-4 * eig("s"), horizon_conv=10)[0]
    assert fit.converging
    assert abs(fit.rate - LOG_CONTRACT) <= 1e-3
    s = stable_transfer_check(cat2, [(x, x + 1e-4 * eig("s")), (x, x + 1e-4 * eig("u"))],
                              n=10**4)
    assert [p.converging for p in s.pairs] == [True, False]
    assert s.pairs[0].passed and s.pairs[1].passed is None
    assert s.not_converging == 1 and s.pass_rate == 1.0


def test_stable_candidates(cat2, cat2shear):
    x = np.array([0.41, 0.77])
    fr = estimate_splitting(cat2, x)
    assert len(stable_candidates(cat2, x, fr, count=10, t_scale=1e-3)) == 10
    fr = estimate_splitting(cat2shear, x)
    assert len(stable_candidates(cat2shear, x, fr, count=10, t_scale=1e-3)) == 10
    ident = build_system("id2")
    fr = estimate_splitting(ident, x, strict=False)
    assert stable_candidates(ident, x, fr) == []


def test_unstable_candidates_are_stable_for_inverse(cat2shear):
    x = np.array([0.13, 0.58])
    fr = estimate_splitting(cat2shear, x)
    inv_fr = estimate_splitting(cat2shear.inverse(), x)
    a = unstable_candidates(cat2shear, x, fr, count=6)
    b = stable_candidates(cat2shear.inverse(), x, inv_fr, count=6)
    assert len(a) == len(b) == 6
    assert np.allclose(np.array(a), np.array(b), atol=1e-12)


def test_csv_exports(tmp_path, cat2):
    X = rng.uniform_points(0, "t", 3, 2)
    bank = default_bank(2)
    ps = profiles(cat2, X, bank, 1000)
    write_profiles_csv(ps, bank, tmp_path / "p.csv", [0, 0, 0])
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert len(lines) == 4 and lines[0].endswith("cluster")
    s = stable_transfer_check(cat2, [(X[0], X[0])], bank, 1000)
    write_pairs_csv(s, tmp_path / "q.csv")
    assert (tmp_path / "q.csv").read_text().splitlines()[0].split(",")[-4:] == \
        ["rate", "converging", "gap", "passed"]
