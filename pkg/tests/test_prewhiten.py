import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpicsel.criteria import AIC, AICc, BIC, GIC, MPIC, Oracle, PriorKind, score
from mpicsel.errors import DegenerateResiduals
from mpicsel.prewhiten import (
    Ar1Whitener,
    ar1_covariance,
    ar1_precision,
    estimate_rho,
    whiten,
    whiten_select,
)
from mpicsel.regression import Dataset, ModelIndex
from mpicsel.selection import Explicit, Nested, select
from mpicsel.simulation import default_true_model, gen_design

from oracles import sym_inv_sqrt


def ar1_errors(rng, n, p, rho, chol=None):
    eta = rng.standard_normal((n, p))
    if chol is not None:
        eta = eta @ chol.T
    e = np.empty_like(eta)
    e[0] = eta[0]
    s = np.sqrt(1 - rho * rho)
    for t in range(1, n):
        e[t] = rho * e[t - 1] + s * eta[t]
    return e


def ar1_dataset(rng, n=200, p=8, rho=0.5):
    tm = default_true_model(p)
    X = gen_design(n, 8, rng)
    Y = X[:, :5] @ tm.theta_star + ar1_errors(rng, n, p, rho, tm.chol)
    return Dataset(Y, X), tm


def test_filter_norm_matches_dense_precision():
    rng = np.random.default_rng(0)
    for rho in (-0.9, -0.3, 0.2, 0.75):
        y = rng.standard_normal(6)
        wy = Ar1Whitener(rho, 6).apply(y)
        want = y @ ar1_precision(6, rho) @ y
        assert abs(wy @ wy - want) <= 1e-8 * want


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 50), st.floats(-0.95, 0.95))
def test_tridiagonal_precision_inverts_covariance(n, rho):
    prod = ar1_covariance(n, rho) @ ar1_precision(n, rho)
    assert np.max(np.abs(prod - np.eye(n))) < 1e-8


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 40), st.floats(-0.95, 0.95))
def test_filter_gram_is_precision(n, rho):
    W = Ar1Whitener(rho, n).apply(np.eye(n))
    np.testing.assert_allclose(W.T @ W, ar1_precision(n, rho), atol=1e-8 / (1 - rho * rho))


def test_whiten_zero_is_identity_bit_exact():
    rng = np.random.default_rng(1)
    d = Dataset(rng.standard_normal((20, 3)), rng.standard_normal((20, 4)))
    w = whiten(d, 0.0)
    assert np.array_equal(w.Y, d.Y) and np.array_equal(w.X, d.X)
    assert w.Y.tobytes() == d.Y.tobytes() and w.X.tobytes() == d.X.tobytes()


def test_whitener_validation():
    with pytest.raises(ValueError):
        Ar1Whitener(1.0, 5)
    with pytest.raises(ValueError):
        Ar1Whitener(0.5, 5).apply(np.ones(4))


def test_root_invariance_of_scores():
    rng = np.random.default_rng(2)
    specs = [AIC(), AICc(), BIC(), GIC(), MPIC(), MPIC(PriorKind.NORMAL), MPIC(PriorKind.UNIFORM)]
    for _ in range(5):
        d, _ = ar1_dataset(rng, n=40, p=3, rho=0.6)
        rho = float(rng.uniform(-0.8, 0.8))
        banded = whiten(d, rho)
        S = sym_inv_sqrt(ar1_covariance(d.n, rho))
        sym = Dataset(S @ d.Y, S @ d.X)
        for spec in specs:
            for j in [(0,), (0, 1, 2), (0, 1, 2, 3, 4, 6)]:
                a, b = score(banded, j, spec).value, score(sym, j, spec).value
                assert abs(a - b) < 1e-6


def test_estimate_rho_white_noise():
    n, p = 300, 4
    for seed in range(10):
        rng = np.random.default_rng(seed)
        X = gen_design(n, 5, rng)
        d = Dataset(X @ rng.standard_normal((5, p)) + rng.standard_normal((n, p)), X)
        assert abs(estimate_rho(d)) < 3 / np.sqrt(n * p)


def test_estimate_rho_ar1():
    rng = np.random.default_rng(3)
    n, p = 2000, 5
    X = gen_design(n, 3, rng)
    d = Dataset(X @ rng.standard_normal((3, p)) + ar1_errors(rng, n, p, 0.6), X)
    assert 0.55 <= estimate_rho(d) <= 0.65


def test_estimate_rho_clipped():
    n = 400
    t = np.arange(n, dtype=float)
    X = np.ones((n, 1))
    d = Dataset(np.cumsum(np.cumsum(np.random.default_rng(4).standard_normal(n)))[:, None] + t[:, None], X)
    assert estimate_rho(d) == pytest.approx(0.999)


def test_estimate_rho_degenerate():
    rng = np.random.default_rng(5)
    X = gen_design(30, 3, rng)
    with pytest.raises(DegenerateResiduals):
        estimate_rho(Dataset(X @ rng.standard_normal((3, 2)), X))


def test_whiten_select_without_split():
    rng = np.random.default_rng(6)
    d, _ = ar1_dataset(rng)
    res = whiten_select(d, Nested(8), MPIC())
    assert res.prediction_error is None
    assert res.report.best == select(whiten(d, res.rho_hat), Nested(8), MPIC()).best
    assert res.rho_hat == estimate_rho(d)


def test_whiten_select_rho_zero_matches_raw_selection():
    rng = np.random.default_rng(7)
    d, _ = ar1_dataset(rng, rho=0.0)
    for spec in (AIC(), BIC(), MPIC()):
        assert whiten_select(d, Nested(8), spec, rho=0.0).report.best == select(d, Nested(8), spec).best


def test_whiten_select_split_validation():
    rng = np.random.default_rng(8)
    d, _ = ar1_dataset(rng, n=50)
    for bad in (50, 60, 9):
        with pytest.raises(ValueError):
            whiten_select(d, Nested(8), AIC(), split_at=bad)


def test_prediction_error_near_zero_for_nearly_exact_full_model():
    # Noise 1e-10 on the training rows; an exact fit would be rejected upstream.
    rng = np.random.default_rng(9)
    n, p = 60, 2
    X = gen_design(n, 4, rng)
    Y = X @ rng.standard_normal((4, p))
    Y[:40] += 1e-10 * rng.standard_normal((40, p))
    full = ModelIndex((0, 1, 2, 3))
    res = whiten_select(Dataset(Y, X), Explicit((full,)), Oracle(full), split_at=40, rho=0.3)
    assert res.report.best == full
    assert res.n_test == 20 and res.n_train == 40
    assert res.prediction_error < 1e-16


def test_prediction_error_formula():
    rng = np.random.default_rng(10)
    d, _ = ar1_dataset(rng, n=120, p=3, rho=0.4)
    res = whiten_select(d, Nested(8), BIC(), split_at=90)
    train = whiten(d.rows(slice(0, 90)), res.rho_hat)
    idx = list(res.report.best.indices)
    Xw = train.X[:, idx]
    theta = np.linalg.lstsq(Xw, train.Y, rcond=None)[0]
    resid = d.Y[90:] - d.X[90:, idx] @ theta
    assert res.prediction_error == pytest.approx(np.mean(resid ** 2), rel=1e-10)


@pytest.mark.slow
def test_ar1_pipeline_keeps_true_columns():
    hits = 0
    for seed in range(100):
        d, tm = ar1_dataset(np.random.default_rng([17, seed]))
        res = whiten_select(d, Nested(8), MPIC())
        hits += res.report.best.issuperset(tm.j_star)
    assert hits >= 90
