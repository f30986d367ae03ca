"""Tests for the k-NN mutual-information and CMI estimators."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmiselect import knn_estimators as ke
from cmiselect.knn_estimators import (
    KnnConfig,
    PermutationCmi,
    digamma,
    fp_cmi,
    knn_distances,
    ksg_mi,
)

EULER_GAMMA = 0.5772156649015329


def brute_radii(pts, k):
    """O(n^2) Chebyshev k-NN radii, the oracle for knn_distances."""
    pts = np.asarray(pts, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    d = np.abs(pts[:, None, :] - pts[None, :, :]).max(axis=2)
    np.fill_diagonal(d, np.inf)
    d.sort(axis=1)
    return d[:, k - 1]


# -- digamma ------------------------------------------------------------

def test_digamma_known_values():
    assert abs(digamma(1.0) + EULER_GAMMA) < 1e-10
    assert abs(digamma(2.0) - (1.0 - EULER_GAMMA)) < 1e-10
    assert abs(digamma(0.5) - (-EULER_GAMMA - 2.0 * np.log(2.0))) < 1e-10


def test_digamma_rejects_nonpositive():
    with pytest.raises(ValueError):
        digamma(0.0)
    with pytest.raises(ValueError):
        digamma(np.array([1.0, -2.0]))


@given(st.floats(min_value=1e-3, max_value=50.0))
@settings(max_examples=200, deadline=None)
def test_digamma_recurrence(x):
    assert abs(digamma(x + 1.0) - (digamma(x) + 1.0 / x)) < 1e-9


def test_digamma_array_matches_scalar():
    xs = np.array([0.01, 0.5, 1.0, 3.7, 12.0])
    np.testing.assert_allclose(digamma(xs), [digamma(v) for v in xs],
                               rtol=0, atol=1e-12)


# -- knn_distances ------------------------------------------------------

def test_knn_distances_hand_example():
    np.testing.assert_array_equal(
        knn_distances([[0.0], [1.0], [3.0]], 1), [1.0, 1.0, 2.0])


def test_knn_distances_duplicates_give_zero():
    pts = [[0.5, 0.5], [0.5, 0.5], [2.0, 2.0]]
    radii = knn_distances(pts, 1)
    assert radii[0] == 0.0 and radii[1] == 0.0


def test_knn_distances_k_too_large():
    with pytest.raises(ValueError):
        knn_distances([[0.0], [1.0]], 2)


def test_knn_distances_matches_brute_force():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(500, 2))
    np.testing.assert_array_equal(knn_distances(pts, 5), brute_radii(pts, 5))


@given(st.integers(min_value=0, max_value=2 ** 31),
       st.integers(min_value=2, max_value=60),
       st.integers(min_value=1, max_value=3))
@settings(max_examples=40, deadline=None)
def test_knn_distances_brute_property(seed, n, d):
    rng = np.random.default_rng(seed)
    pts = np.round(rng.normal(size=(n, d)), 1)  # rounding forces ties
    k = int(rng.integers(1, n))
    np.testing.assert_array_equal(knn_distances(pts, k), brute_radii(pts, k))


def test_tree_path_matches_brute_force_above_cutoff():
    rng = np.random.default_rng(7)
    pts = rng.normal(size=(ke._BRUTE_FORCE_MAX + 40, 3))
    np.testing.assert_array_equal(knn_distances(pts, 4), brute_radii(pts, 4))


# -- neighbor-count exactness -------------------------------------------

def test_counts_match_brute_force_oracle():
    """Strict and closed-ball counts vs a direct scan, with ties."""
    rng = np.random.default_rng(3)
    block = np.round(rng.normal(size=(500, 2)), 1)
    radii = np.abs(rng.normal(size=500)) + 1e-6
    radii[::7] = 0.0
    d = np.abs(block[:, None, :] - block[None, :, :]).max(axis=2)
    np.fill_diagonal(d, np.inf)
    np.testing.assert_array_equal(ke._count_lt(block, radii),
                                  (d < radii[:, None]).sum(axis=1))
    np.testing.assert_array_equal(ke._count_le(block, radii),
                                  (d <= radii[:, None]).sum(axis=1))


def brute_ksg_mi(x, y, k):
    """Direct implementation of the strict-mode MI estimator."""
    x = np.asarray(x, float).reshape(len(x), -1)
    y = np.asarray(y, float).reshape(len(y), -1)
    n = len(x)
    dx = np.abs(x[:, None, :] - x[None, :, :]).max(axis=2)
    dy = np.abs(y[:, None, :] - y[None, :, :]).max(axis=2)
    joint = np.maximum(dx, dy)
    np.fill_diagonal(joint, np.inf)
    radii = np.sort(joint, axis=1)[:, k - 1]
    np.fill_diagonal(dx, np.inf)
    np.fill_diagonal(dy, np.inf)
    nx = (dx < radii[:, None]).sum(axis=1)
    ny = (dy < radii[:, None]).sum(axis=1)
    return (digamma(float(k)) + digamma(float(n))
            - np.mean(digamma(nx + 1.0) + digamma(ny + 1.0)))


def brute_fp_cmi(x, y, z, k):
    """Direct implementation of the strict-mode CMI estimator."""
    x = np.asarray(x, float).reshape(len(x), -1)
    y = np.asarray(y, float).reshape(len(y), -1)
    z = np.asarray(z, float).reshape(len(z), -1)
    dx = np.abs(x[:, None, :] - x[None, :, :]).max(axis=2)
    dy = np.abs(y[:, None, :] - y[None, :, :]).max(axis=2)
    dz = np.abs(z[:, None, :] - z[None, :, :]).max(axis=2)
    joint = np.maximum(np.maximum(dx, dy), dz)
    np.fill_diagonal(joint, np.inf)
    radii = np.sort(joint, axis=1)[:, k - 1]
    dxz = np.maximum(dx, dz)
    dyz = np.maximum(dy, dz)
    for m in (dxz, dyz, dz):
        np.fill_diagonal(m, np.inf)
    r = radii[:, None]
    nxz = (dxz < r).sum(axis=1)
    nyz = (dyz < r).sum(axis=1)
    nz = (dz < r).sum(axis=1)
    return digamma(float(k)) - np.mean(
        digamma(nxz + 1.0) + digamma(nyz + 1.0) - digamma(nz + 1.0))


def test_ksg_mi_matches_direct_formula():
    rng = np.random.default_rng(4)
    x = rng.normal(size=200)
    y = 0.5 * x + rng.normal(size=200)
    assert abs(ksg_mi(x, y, KnnConfig(k=4)) - brute_ksg_mi(x, y, 4)) < 1e-12


def test_fp_cmi_matches_direct_formula():
    rng = np.random.default_rng(5)
    z = rng.normal(size=200)
    x = z + rng.normal(size=200)
    y = z + rng.normal(size=200)
    assert abs(fp_cmi(x, y, z, KnnConfig(k=4)) - brute_fp_cmi(x, y, z, 4)) < 1e-12


# -- statistical examples -----------------------------------------------

def test_mi_independent_normals_near_zero():
    rng = np.random.default_rng(10)
    x = rng.normal(size=2000)
    y = rng.normal(size=2000)
    assert abs(ksg_mi(x, y)) < 0.05


def test_mi_correlated_gaussian_matches_closed_form():
    rho = 0.9
    truth = -0.5 * np.log(1.0 - rho ** 2)
    estimates = []
    for seed in range(10):
        rng = np.random.default_rng(seed)
        z = rng.normal(size=(2000, 2))
        x = z[:, 0]
        y = rho * x + np.sqrt(1.0 - rho ** 2) * z[:, 1]
        estimates.append(ksg_mi(x, y))
    assert abs(np.mean(estimates) - truth) < 0.05


def test_mi_mixed_mode_binary_label():
    rng = np.random.default_rng(11)
    y = rng.integers(0, 2, size=2000).astype(float)
    x = y + rng.uniform(0.0, 1.0, size=2000)
    est = ksg_mi(x, y, KnnConfig(k=5, tie_mode="mixed"))
    assert abs(est - np.log(2.0)) < 0.05


def test_cmi_self_dependence_positive():
    rng = np.random.default_rng(12)
    x = rng.normal(size=500)
    z = rng.normal(size=500)
    assert fp_cmi(x, x, z) > 0.5


def test_cmi_gaussian_chain_near_zero():
    rng = np.random.default_rng(13)
    x = rng.normal(size=2000)
    z = x + rng.normal(size=2000)
    y = z + rng.normal(size=2000)
    assert abs(fp_cmi(x, y, z)) <= 0.05


def test_cmi_with_irrelevant_z_matches_mi():
    rng = np.random.default_rng(14)
    x = rng.normal(size=2000)
    y = 0.8 * x + rng.normal(size=2000)
    z = rng.normal(size=2000)
    assert abs(fp_cmi(x, y, z) - ksg_mi(x, y)) < 0.05


# -- invariances ----------------------------------------------------------

def test_permutation_invariance():
    rng = np.random.default_rng(15)
    x = rng.normal(size=300)
    y = x + rng.normal(size=300)
    z = rng.normal(size=300)
    order = rng.permutation(300)
    # equality up to summation order of the per-point digamma terms
    assert abs(ksg_mi(x, y) - ksg_mi(x[order], y[order])) < 1e-12
    assert abs(fp_cmi(x, y, z) - fp_cmi(x[order], y[order], z[order])) < 1e-12


def test_monotone_map_invariance():
    rng = np.random.default_rng(16)
    x = rng.normal(size=2000)
    y = 0.7 * x + rng.normal(size=2000)
    assert abs(ksg_mi(x, y) - ksg_mi(np.exp(x), y)) <= 0.02


# -- evaluator internals --------------------------------------------------

def test_matrix_and_tree_paths_agree(monkeypatch):
    rng = np.random.default_rng(17)
    x = rng.normal(size=(400, 1))
    y = x + rng.normal(size=(400, 1))
    z = rng.normal(size=(400, 1))
    via_matrix = fp_cmi(x, y, z)
    mi_matrix = ksg_mi(x, y)
    monkeypatch.setattr(ke, "_MATRIX_MAX", 10)
    assert abs(fp_cmi(x, y, z) - via_matrix) < 1e-12
    assert abs(ksg_mi(x, y) - mi_matrix) < 1e-12


def test_permuted_estimate_equals_estimator_on_permuted_data(monkeypatch):
    rng = np.random.default_rng(18)
    x = rng.normal(size=(300, 1))
    y = x + rng.normal(size=(300, 1))
    z = rng.normal(size=(300, 1))
    perm = rng.permutation(300)
    for cutoff in (2600, 10):  # matrix path, then top-M/tree path
        monkeypatch.setattr(ke, "_MATRIX_MAX", cutoff)
        ev = PermutationCmi(x, y, z)
        assert abs(ev.estimate(perm) - fp_cmi(x[perm], y, z)) < 1e-12


def test_shared_cache_does_not_change_results():
    rng = np.random.default_rng(19)
    x1 = rng.normal(size=(300, 1))
    x2 = rng.normal(size=(300, 1))
    y = x1 + rng.normal(size=(300, 1))
    z = rng.normal(size=(300, 2))
    cache = {}
    a1 = PermutationCmi(x1, y, z, cache=cache).estimate()
    a2 = PermutationCmi(x2, y, z, cache=cache).estimate()
    assert a1 == PermutationCmi(x1, y, z).estimate()
    assert a2 == PermutationCmi(x2, y, z).estimate()
    assert len(cache) == 1  # the (y, z) work is shared


# -- error handling -------------------------------------------------------

def test_length_mismatch_rejected():
    with pytest.raises(ValueError):
        ksg_mi(np.zeros(10), np.zeros(11))
    with pytest.raises(ValueError):
        fp_cmi(np.zeros(10), np.zeros(10), np.zeros(9))


def test_k_too_large_rejected():
    with pytest.raises(ValueError):
        ksg_mi(np.arange(5.0), np.arange(5.0), KnnConfig(k=5))


def test_config_validation():
    with pytest.raises(ValueError):
        KnnConfig(k=0)
    with pytest.raises(ValueError):
        KnnConfig(tie_mode="loose")
    with pytest.raises(ValueError):
        KnnConfig(jitter=-0.1)


def test_non_finite_samples_rejected():
    bad = np.array([1.0, np.nan, 2.0])
    with pytest.raises(ValueError):
        ksg_mi(bad, np.arange(3.0))
