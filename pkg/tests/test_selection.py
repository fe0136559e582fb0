import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpicsel.criteria import AIC, AICc, BIC, GIC, MPIC, Oracle
from mpicsel.errors import NoScoreableModel, TooManyModels
from mpicsel.regression import Dataset, ModelIndex
from mpicsel.selection import (
    TIE_ATOL,
    Explicit,
    ForcedSubsets,
    Nested,
    SkipReason,
    enumerate_models,
    select,
    select_many,
)
from mpicsel.simulation import Gaussian, default_true_model, gen_design, gen_response

M = ModelIndex.of


def test_nested_enumeration():
    assert enumerate_models(Nested(3), 5) == [M([0]), M([0, 1]), M([0, 1, 2])]
    with pytest.raises(ValueError):
        enumerate_models(Nested(6), 5)


def test_forced_subsets_enumeration():
    got = enumerate_models(ForcedSubsets((0,), (1, 2)), 3)
    assert got == [M([0]), M([0, 1]), M([0, 2]), M([0, 1, 2])]
    assert len(enumerate_models(ForcedSubsets((0,), tuple(range(1, 8))), 8)) == 128


def test_forced_subsets_validation():
    with pytest.raises(ValueError):
        ForcedSubsets((0, 1), (1, 2))
    with pytest.raises(ValueError):
        enumerate_models(ForcedSubsets((0,), (1, 9)), 5)
    with pytest.raises(TooManyModels):
        enumerate_models(ForcedSubsets((), tuple(range(25))), 30)


def test_empty_forced_set_skips_empty_model():
    got = enumerate_models(ForcedSubsets((), (0, 1)), 2)
    assert got == [M([0]), M([1]), M([0, 1])]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sets(st.integers(0, 5), min_size=1, max_size=4), min_size=1, max_size=12))
def test_explicit_enumeration_sorted_and_unique(sets):
    models = [M(sorted(s)) for s in sets]
    out = enumerate_models(Explicit(tuple(models)), 6)
    assert out == sorted(set(models), key=ModelIndex.sort_key)
    assert len(out) == len(set(out))


def _seeded(n=60, p=2, seed=0, noise=1.0):
    tm = default_true_model(p)
    rng = np.random.default_rng(seed)
    X = gen_design(n, 8, rng)
    Y = X[:, :5] @ tm.theta_star + noise * rng.standard_normal((n, p))
    return Dataset(Y, X), tm


def test_duplicate_columns_tie_and_break_to_smallest():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(20)
    X = np.column_stack([x, x, rng.standard_normal(20)])
    Y = 2 * x[:, None] + rng.standard_normal((20, 1))
    rep = select(Dataset(Y, X), Explicit((M([1]), M([0]))), AIC())
    assert rep.ties == [M([0]), M([1])]
    assert rep.best == M([0])


def test_near_noiseless_data_selects_superset_of_truth():
    d, tm = _seeded(noise=1e-6)
    for spec in (AIC(), AICc(), BIC(), GIC(), MPIC()):
        assert select(d, Nested(8), spec).best.issuperset(tm.j_star)


def test_report_contents_and_best_score():
    d, _ = _seeded(seed=3)
    rep = select(d, Nested(8), BIC())
    finite = {m: s.value for m, s in rep.scores.items()}
    assert rep.best_score.value == min(finite.values())
    assert all(v - rep.best_score.value <= TIE_ATOL for v in (finite[m] for m in rep.ties))
    assert rep.skipped == {}


def test_skips_match_exact_aic_domain():
    rng = np.random.default_rng(4)
    n, p = 12, 4
    d = Dataset(rng.standard_normal((n, p)), np.column_stack([np.ones(n), rng.standard_normal((n, 7))]))
    for spec in (AICc(), MPIC()):
        rep = select(d, Nested(8), spec)
        skipped = set(rep.skipped)
        assert skipped == {m for m in enumerate_models(Nested(8), 8) if n <= p + m.k_j + 1}
        assert all(isinstance(s, SkipReason) and s.kind == "DimensionGuard" for s in rep.skipped.values())


def test_no_scoreable_model():
    rng = np.random.default_rng(5)
    d = Dataset(rng.standard_normal((8, 6)), rng.standard_normal((8, 3)))
    with pytest.raises(NoScoreableModel):
        select(d, Nested(3), AICc())


def test_rank_deficient_model_is_skipped_not_fatal():
    rng = np.random.default_rng(6)
    x = rng.standard_normal(30)
    X = np.column_stack([np.ones(30), x, 3 * x])
    d = Dataset(x[:, None] + rng.standard_normal((30, 1)), X)
    rep = select(d, Nested(3), BIC())
    assert rep.skipped[M([0, 1, 2])].kind == "RankDeficient"
    assert rep.best == M([0, 1])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.randoms(use_true_random=False))
def test_explicit_order_invariance(seed, rnd):
    d, _ = _seeded(n=40, seed=seed)
    models = enumerate_models(ForcedSubsets((0,), (1, 2, 3, 4)), 8)
    shuffled = list(models)
    rnd.shuffle(shuffled)
    a = select(d, Explicit(tuple(models)), MPIC())
    b = select(d, Explicit(tuple(shuffled)), MPIC())
    assert a.best == b.best and a.ties == b.ties


def test_select_many_matches_select():
    d, _ = _seeded(seed=7)
    specs = [AIC(), BIC(), MPIC()]
    many = select_many(d, Nested(8), specs)
    for spec, rep in zip(specs, many):
        assert rep.best == select(d, Nested(8), spec).best


def test_oracle_spec_through_select():
    d, tm = _seeded(seed=8)
    assert select(d, Nested(8), Oracle(tm.j_star)).best == tm.j_star


@pytest.mark.slow
def test_bic_selects_truth_at_n500_p2():
    tm = default_true_model(2)
    hits = 0
    for r in range(200):
        rng = np.random.default_rng([99, r])
        X = gen_design(500, 10, rng)
        d = Dataset(gen_response(X, tm, Gaussian(), rng), X)
        hits += select(d, Nested(10), BIC()).best == tm.j_star
    assert hits / 200 >= 0.95
