import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crt.classify import (
    ConvergenceWarning,
    default_gamma,
    knn_classify,
    knn_predict,
    lasso_objective,
    lasso_optimality,
    normalize_columns,
    pca_fit,
    pca_project,
    pca_reconstruct,
    src_fit,
    src_identity,
    src_predict,
)

import oracles


# -- knn --------------------------------------------------------------------

def test_knn_single_point():
    assert knn_classify(np.array([[1.0, 2.0]]).T, [4], np.zeros(2), 1) == 4


def test_knn_majority():
    train = np.array([[0.0, 0.1, 0.2, 5.0]])
    assert knn_classify(train, [0, 0, 1, 1], np.array([0.05]), 3) == 0


def test_knn_distance_tie_goes_to_lower_index():
    train = np.array([[-1.0, 1.0]])
    assert knn_classify(train, [1, 0], np.array([0.0]), 1) == 1
    assert knn_classify(train, [0, 1], np.array([0.0]), 1) == 0


def test_knn_vote_tie_goes_to_nearest_member():
    train = np.array([[0.5, -0.2, 3.0, 4.0]])
    # k=2: one vote each for classes 1 and 0; class 0's member is nearer
    assert knn_classify(train, [1, 0, 1, 2], np.array([0.0]), 2) == 0


def test_knn_errors():
    with pytest.raises(ValueError, match="empty"):
        knn_classify(np.zeros((2, 0)), [], np.zeros(2), 1)
    with pytest.raises(ValueError):
        knn_classify(np.zeros((2, 2)), [0, 1], np.zeros(2), 3)


@pytest.mark.parametrize("k", [1, 3])
def test_knn_matches_exhaustive_scan(k):
    rng = np.random.default_rng(k)
    train = rng.standard_normal((4, 50))
    labels = rng.integers(0, 4, 50)
    queries = rng.standard_normal((4, 100))
    pred = knn_predict(train, labels, queries, k)
    ref = [oracles.knn_exhaustive(train, labels, queries[:, j], k) for j in range(100)]
    np.testing.assert_array_equal(pred, ref)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([1, 3]))
def test_knn_permutation_invariance(seed, k):
    rng = np.random.default_rng(seed)
    train = rng.standard_normal((3, 15))
    labels = rng.integers(0, 3, 15)
    q = rng.standard_normal(3)
    perm = rng.permutation(15)
    dist = np.sum((train - q[:, None]) ** 2, axis=0)
    near = np.sort(dist)[: k + 1]
    if np.any(np.diff(near) == 0):
        return
    assert knn_classify(train, labels, q, k) == knn_classify(train[:, perm], labels[perm], q, k)


# -- src --------------------------------------------------------------------

def test_src_self_coding():
    rng = np.random.default_rng(0)
    d = normalize_columns(rng.standard_normal((20, 8)))
    alpha = src_fit(d, d[:, 3], gamma=1e-4)
    assert alpha[3] > 0.99
    assert np.all(np.abs(np.delete(alpha, 3)) < 1e-3)


def test_src_zero_signal():
    d = np.random.default_rng(1).standard_normal((5, 7))
    assert not src_fit(d, np.zeros(5)).any()


def test_src_matches_coordinate_descent():
    rng = np.random.default_rng(2)
    d = normalize_columns(rng.standard_normal((10, 25)))
    y = rng.standard_normal(10)
    gamma = 0.05
    alpha = src_fit(d, y, gamma, max_iter=20000, tol=1e-10)
    ref = oracles.lasso_cd(d, y, gamma)
    assert abs(lasso_objective(d, y, alpha, gamma) - oracles.lasso_value(d, y, ref, gamma)) < 1e-6
    assert lasso_optimality(d, y, alpha, gamma) < 1e-6


def test_src_default_tolerance_meets_optimality():
    rng = np.random.default_rng(3)
    d = normalize_columns(rng.standard_normal((12, 30)))
    y = rng.standard_normal(12)
    gamma = default_gamma(d, y)
    alpha = src_fit(d, y)
    assert lasso_optimality(d, y, alpha, gamma) < 1e-6


def test_src_monotone_objective():
    rng = np.random.default_rng(4)
    d = rng.standard_normal((15, 40))
    y = rng.standard_normal(15)
    hist: list = []
    src_fit(d, y, 0.02, history=hist)
    assert len(hist) > 1
    assert np.all(np.diff(hist) <= 0)


def test_src_nonconvergence_warns():
    rng = np.random.default_rng(5)
    d = rng.standard_normal((15, 40))
    with pytest.warns(ConvergenceWarning):
        src_fit(d, rng.standard_normal(15), 1e-4, max_iter=3)


def test_src_rejects_nonpositive_gamma():
    with pytest.raises(ValueError):
        src_fit(np.eye(3), np.ones(3), gamma=0.0)


def test_src_identity_exact_class():
    rng = np.random.default_rng(6)
    d = normalize_columns(rng.standard_normal((10, 9)))
    labels = np.repeat([0, 1, 2], 3)
    alpha = np.zeros(9)
    alpha[6:] = [0.5, -1.0, 2.0]
    sol = src_identity(d, labels, d @ alpha, alpha)
    assert sol.predicted == 2
    assert sol.residuals_per_class[2] == pytest.approx(0.0, abs=1e-12)


def test_src_identity_zero_alpha():
    d = np.random.default_rng(7).standard_normal((6, 6))
    y = np.arange(6.0)
    sol = src_identity(d, [0, 0, 1, 1, 2, 2], y, np.zeros(6))
    np.testing.assert_allclose(sol.residuals_per_class, np.linalg.norm(y))
    assert sol.predicted == 0


def test_src_identity_random_alpha():
    rng = np.random.default_rng(8)
    raw = rng.standard_normal((7, 12))
    labels = rng.integers(0, 3, 12)
    alpha = rng.standard_normal(12)
    y = rng.standard_normal(7)
    sol = src_identity(raw, labels, y, alpha)
    unit = raw / np.linalg.norm(raw, axis=0)
    for c in range(3):
        ref = y.copy()
        for j in range(12):
            if labels[j] == c:
                ref = ref - unit[:, j] * alpha[j]
        assert sol.residuals_per_class[c] == pytest.approx(np.linalg.norm(ref), rel=1e-12)
    with pytest.raises(ValueError):
        src_identity(raw, labels, y, alpha[:5])


def test_src_predict_separable():
    rng = np.random.default_rng(9)
    centers = np.eye(6)[:, :3] * 5
    labels = np.repeat([0, 1, 2], 6)
    train = centers[:, labels] + 0.1 * rng.standard_normal((6, 18))
    queries = centers + 0.1 * rng.standard_normal((6, 3))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        np.testing.assert_array_equal(src_predict(train, labels, queries), [0, 1, 2])


# -- pca --------------------------------------------------------------------

def test_pca_single_axis():
    rng = np.random.default_rng(10)
    data = np.zeros((4, 30))
    data[0] = rng.standard_normal(30)
    model = pca_fit(data, 1)
    np.testing.assert_allclose(np.abs(model.components[:, 0]), [1, 0, 0, 0], atol=1e-12)


def test_pca_mean_projects_to_zero_and_orthonormal():
    rng = np.random.default_rng(11)
    data = rng.standard_normal((8, 20))
    model = pca_fit(data, 5)
    np.testing.assert_allclose(pca_project(model, model.mean), 0.0, atol=1e-12)
    np.testing.assert_allclose(model.components.T @ model.components, np.eye(5), atol=1e-8)


def test_pca_reconstruction_error_identity():
    rng = np.random.default_rng(12)
    data = rng.standard_normal((10, 25))
    d = 4
    model = pca_fit(data, d)
    err = np.sum((pca_reconstruct(model, data) - data) ** 2) / data.shape[1]
    s = np.linalg.svd(data - data.mean(axis=1, keepdims=True), compute_uv=False)
    assert err == pytest.approx(np.sum(s[d:] ** 2) / data.shape[1], rel=1e-10)


def test_pca_rejects_large_d():
    with pytest.raises(ValueError, match="too large"):
        pca_fit(np.ones((3, 5)), 4)
