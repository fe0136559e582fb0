import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpicsel.errors import DataError, RankDeficient, SigmaNotPD
from mpicsel.regression import (
    LOG_2PI,
    Dataset,
    ModelIndex,
    fit,
    logdet_capacitance,
    quadform_smoothed,
)

from oracles import (
    dense_logdet_capacitance,
    dense_quadform,
    matrix_normal_neg2loglik,
    naive_fit,
    random_instance,
)


def rel(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


# Dataset / ModelIndex ----------------------------------------------------------

def test_dataset_rejects_bad_input():
    with pytest.raises(DataError):
        Dataset(np.zeros((3, 1)), np.zeros((4, 1)))
    with pytest.raises(DataError):
        Dataset(np.zeros((3, 1)), np.zeros((3, 3)))  # n <= k
    bad = np.ones((5, 1))
    bad[2, 0] = np.nan
    with pytest.raises(DataError):
        Dataset(bad, np.ones((5, 1)))
    with pytest.raises(DataError):
        Dataset(np.ones((5, 1)), np.ones((5, 2)), ("a",))


def test_dataset_is_read_only_copy():
    Y = np.arange(6.0).reshape(3, 2)
    d = Dataset(Y, np.ones((3, 1)))
    Y[0, 0] = 99.0
    assert d.Y[0, 0] == 0.0
    with pytest.raises(ValueError):
        d.Y[0, 0] = 1.0
    assert d.col_names == ("x0",)


def test_model_index_canonical():
    m = ModelIndex((3, 0, 1))
    assert m.indices == (0, 1, 3)
    assert m == ModelIndex.of([1, 3, 0])
    assert hash(m) == hash(ModelIndex((0, 1, 3)))
    assert str(m) == "{0,1,3}"
    assert m.issuperset(ModelIndex((0, 3)))
    assert ModelIndex((5,)) < ModelIndex((0, 1))
    for bad in [(), (-1,), (1, 1)]:
        with pytest.raises(ValueError):
            ModelIndex(bad)


# fit ---------------------------------------------------------------------------

def test_intercept_only_gives_means_and_mle_covariance():
    rng = np.random.default_rng(1)
    Y = rng.standard_normal((30, 3))
    X = np.column_stack([np.ones(30), rng.standard_normal(30)])
    f = fit(Dataset(Y, X), ModelIndex((0,)))
    np.testing.assert_allclose(f.theta_hat[0], Y.mean(axis=0), rtol=1e-12)
    np.testing.assert_allclose(f.sigma_hat, np.cov(Y.T, bias=True), rtol=1e-12)


def test_exact_fit_raises_sigma_not_pd():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((10, 3))
    Y = X[:, :2] @ np.array([[1.0, -2.0], [0.5, 3.0]])
    with pytest.raises(SigmaNotPD):
        fit(Dataset(Y, X), ModelIndex((0, 1)))


def test_too_few_residual_degrees_raises_sigma_not_pd():
    rng = np.random.default_rng(3)
    d = Dataset(rng.standard_normal((6, 4)), rng.standard_normal((6, 3)))
    with pytest.raises(SigmaNotPD):
        fit(d, (0, 1, 2))  # n - k_j = 3 < p = 4


def test_rank_deficient_design():
    rng = np.random.default_rng(4)
    x = rng.standard_normal(20)
    X = np.column_stack([x, 2 * x, rng.standard_normal(20)])
    d = Dataset(rng.standard_normal((20, 1)), X)
    with pytest.raises(RankDeficient):
        fit(d, (0, 1))
    fit(d, (0, 2))


def test_index_out_of_range():
    d = Dataset(np.ones((5, 1)) + np.arange(5)[:, None], np.ones((5, 1)))
    with pytest.raises(DataError):
        fit(d, (1,))


def test_random_8x2_matches_naive_oracle():
    rng = np.random.default_rng(5)
    Y = rng.standard_normal((8, 2))
    X = rng.standard_normal((8, 3))
    f = fit(Dataset(Y, X), (0, 1))
    theta, sigma = naive_fit(Y, X, (0, 1))
    assert rel(f.theta_hat, theta) < 1e-10
    assert rel(f.sigma_hat, sigma) < 1e-10


def test_neg2loglik_identity_and_density_oracle():
    rng = np.random.default_rng(6)
    for _ in range(20):
        Y, X, idx = random_instance(rng)
        f = fit(Dataset(Y, X), idx)
        n, p = Y.shape
        assert f.neg2loglik == n * f.logdet_sigma + n * p * (LOG_2PI + 1.0)
        dens = matrix_normal_neg2loglik(Y, X, idx, f.theta_hat, f.sigma_hat)
        assert abs(f.neg2loglik - dens) <= 1e-8 * max(1.0, abs(dens))
        assert rel(f.sigma_hat, f.sigma_hat.T) == 0.0
        np.linalg.cholesky(f.sigma_hat)
        _, lg = np.linalg.slogdet(X[:, list(idx)].T @ X[:, list(idx)])
        assert abs(f.logdet_gram - lg) <= 1e-8 * max(1.0, abs(lg))


def test_nested_residual_monotone():
    rng = np.random.default_rng(7)
    for _ in range(20):
        n, p = 40, 3
        X = rng.standard_normal((n, 6))
        Y = rng.standard_normal((n, p))
        d = Dataset(Y, X)
        small, big = fit(d, (0, 2)), fit(d, (0, 1, 2, 4))
        ev = np.linalg.eigvalsh(n * small.sigma_hat - n * big.sigma_hat)
        assert ev.min() >= -1e-8


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.permutations([0, 1, 2, 3]))
def test_index_permutation_does_not_change_fit(seed, perm):
    rng = np.random.default_rng(seed)
    d = Dataset(rng.standard_normal((15, 2)), rng.standard_normal((15, 5)))
    a = fit(d, ModelIndex((0, 1, 2, 3)))
    b = fit(d, ModelIndex(tuple(perm)))
    np.testing.assert_array_equal(a.theta_hat, b.theta_hat)
    np.testing.assert_array_equal(a.sigma_hat, b.sigma_hat)
    assert a.neg2loglik == b.neg2loglik


# determinant lemma / Woodbury ---------------------------------------------------

def test_logdet_capacitance_orthonormal():
    rng = np.random.default_rng(8)
    Q, _ = np.linalg.qr(rng.standard_normal((12, 3)))
    d = Dataset(rng.standard_normal((12, 1)), Q)
    assert logdet_capacitance(d, (0, 1, 2)) == pytest.approx(3 * math.log(2), rel=1e-12)


def test_logdet_capacitance_ones_column():
    d = Dataset(np.arange(4.0)[:, None], np.ones((4, 1)))
    assert logdet_capacitance(d, (0,)) == pytest.approx(math.log(5), rel=1e-14)


def test_logdet_capacitance_random_6x2():
    rng = np.random.default_rng(9)
    X = rng.standard_normal((6, 2))
    d = Dataset(rng.standard_normal((6, 1)), X)
    want = dense_logdet_capacitance(X, (0, 1))
    assert abs(logdet_capacitance(d, (0, 1)) - want) <= 1e-8 * abs(want)


def test_quadform_intercept_p1():
    rng = np.random.default_rng(10)
    y = rng.standard_normal(9)
    y = (y - y.mean()) / y.std()
    X = np.column_stack([np.ones(9), rng.standard_normal(9)])
    d = Dataset(y[:, None], X)
    f = fit(d, (0,))
    assert f.sigma_hat[0, 0] == pytest.approx(1.0)
    want = dense_quadform(y[:, None], X, (0,), f.sigma_hat)
    assert quadform_smoothed(d, (0,), f) == pytest.approx(want, rel=1e-8)


def test_quadform_orthogonal_response():
    # Columns of Y orthogonal to X_j with Sigma_hat = I: correction term vanishes.
    rng = np.random.default_rng(11)
    n = 10
    A = np.linalg.qr(rng.standard_normal((n, 4)))[0]
    X = A[:, :1] * 3.0
    Y = A[:, 1:3] * math.sqrt(n)
    d = Dataset(Y, X)
    f = fit(d, (0,))
    np.testing.assert_allclose(f.sigma_hat, np.eye(2), atol=1e-12)
    assert quadform_smoothed(d, (0,), f) == pytest.approx(np.trace(Y.T @ Y), rel=1e-12)


def test_quadform_random_8x2():
    rng = np.random.default_rng(12)
    Y = rng.standard_normal((8, 2))
    X = rng.standard_normal((8, 3))
    d = Dataset(Y, X)
    f = fit(d, (1, 2))
    want = dense_quadform(Y, X, (1, 2), f.sigma_hat)
    assert abs(quadform_smoothed(d, (1, 2), f) - want) <= 1e-8 * want


def test_quadform_rejects_mismatched_fit():
    rng = np.random.default_rng(13)
    d = Dataset(rng.standard_normal((8, 1)), rng.standard_normal((8, 3)))
    with pytest.raises(ValueError):
        quadform_smoothed(d, (0, 1), fit(d, (0,)))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_determinant_lemma_property(seed):
    Y, X, idx = random_instance(np.random.default_rng(seed))
    want = dense_logdet_capacitance(X, idx)
    got = logdet_capacitance(Dataset(Y, X), idx)
    assert abs(got - want) <= 1e-8 * max(1.0, abs(want))
