import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cpkit.crossval import (
    cc_coverage_bound, cross_conformal_set, cv_plus_interval, fold_predictions, jackknife_interval,
    jackknife_inflated_bound, make_folds, tournament_count, tournament_rowsum_check,
    worst_case_tournament,
)
from cpkit.scores import Score, fit_predictor


def _data(rng, n=20, d=1):
    X = rng.standard_normal((n, d))
    return X, X.sum(axis=1) + 0.5 * rng.standard_normal(n)


def test_make_folds_partition():
    folds = make_folds(10, 3, seed=0)
    assert sorted(np.concatenate(folds).tolist()) == list(range(10))
    assert [len(f) for f in folds] == [4, 3, 3]
    assert [f.tolist() for f in make_folds(4, 2)] == [[0, 1], [2, 3]]


@pytest.mark.parametrize("K", [0, 11])
def test_make_folds_bad_k(K):
    with pytest.raises(ValueError):
        make_folds(10, K)


def test_single_fold_cross_conformal_rejected(rng):
    X, y = _data(rng)
    with pytest.raises(ValueError):
        cross_conformal_set(Score(), X, y, X[:1], 0.1, [np.arange(20)])


@pytest.mark.parametrize("n, K, alpha, expected", [
    (100, 5, 0.1, 0.7314285714285714),
    (10, 10, 0.1, 0.8),
    (20, 20, 0.2, 0.6),
])
def test_cc_coverage_bound_examples(n, K, alpha, expected):
    assert cc_coverage_bound(n, K, alpha) == pytest.approx(expected, abs=1e-10)


@given(st.integers(1, 30), st.integers(2, 10), st.floats(0.01, 0.5))
def test_cc_bound_not_worse_than_root_n(m, K, alpha):
    n = m * K
    assert cc_coverage_bound(n, K, alpha) >= 1 - 2 * alpha - 2 / math.sqrt(n) - 1e-12


def test_cc_bound_needs_divisible_folds():
    with pytest.raises(ValueError):
        cc_coverage_bound(10, 3, 0.1)


def test_tournament_zero_matrix_passes():
    A = np.zeros((6, 6), dtype=int)
    assert tournament_count(A, 0.2) == 0
    assert tournament_rowsum_check(A, 0.2)


def test_tournament_validation():
    with pytest.raises(ValueError):
        tournament_rowsum_check(np.ones((3, 3), dtype=int), 0.1)
    with pytest.raises(ValueError):
        tournament_rowsum_check(np.zeros((2, 3), dtype=int), 0.1)


def test_worst_case_tournament_attains_bound():
    A = worst_case_tournament(10, 0.4)
    assert np.all(A + A.T <= 1) and np.trace(A) == 0
    assert tournament_count(A, 0.4) == 7
    assert tournament_rowsum_check(A, 0.4)


@given(st.integers(2, 12), st.integers(0, 2**32 - 1))
def test_random_tournaments_satisfy_rowsum_bound(N, s):
    r = np.random.Generator(np.random.Philox(s))
    U = np.triu(r.integers(0, 2, (N, N)), 1)
    L = np.triu(1 - U, 1).T * r.integers(0, 2, (N, N))  # each pair at most one direction
    A = U + L
    for t in (0.1, 0.25, 0.4):
        assert tournament_rowsum_check(A, t)


def test_classical_jackknife_zero_residual_is_point():
    X = np.arange(6, dtype=float)[:, None]
    y = 2 * X[:, 0] + 1
    S = jackknife_interval("least_squares", X, y, np.array([[10.0]]), 0.2, "classical")
    lo, hi = S.bounds()
    assert lo == pytest.approx(21.0, abs=1e-9) and hi == pytest.approx(21.0, abs=1e-9)


def test_inflated_jackknife_adds_epsilon(rng):
    X, y = _data(rng, 15)
    a = jackknife_interval("least_squares", X, y, X[:1], 0.1, "classical")
    b = jackknife_interval("least_squares", X, y, X[:1], 0.1, "inflated", epsilon=0.25, delta=0.01)
    np.testing.assert_allclose(np.subtract(b.bounds(), a.bounds()), [-0.25, 0.25], atol=1e-12)
    assert jackknife_inflated_bound(99, 0.1, 0.01) == pytest.approx(0.9 - 0.2 - 0.01)


def test_jackknife_needs_two_points():
    with pytest.raises(ValueError):
        jackknife_interval("least_squares", [[0.0]], [1.0], [[0.0]], 0.1)


def test_cv_plus_with_n_folds_is_jackknife_plus(rng):
    X, y = _data(rng, 15, 2)
    folds = [np.array([i]) for i in range(15)]
    for alpha in (0.1, 0.3):
        assert cv_plus_interval("least_squares", X, y, X[:1], alpha, folds) == jackknife_interval(
            "least_squares", X, y, X[:1], alpha)


def test_jackknife_plus_contains_median(rng):
    # the interval always contains the median of the leave-one-out predictions
    for _ in range(20):
        X, y = _data(rng, 12)
        x = rng.standard_normal((1, 1))
        folds = [np.array([i]) for i in range(12)]
        _, mu = fold_predictions("least_squares", X, y, x, folds)
        lo, hi = jackknife_interval("least_squares", X, y, x, 0.2).bounds()
        assert lo <= np.median(mu) <= hi


def test_unequal_folds_warn(rng):
    X, y = _data(rng, 10)
    with pytest.warns(RuntimeWarning):
        cv_plus_interval("least_squares", X, y, X[:1], 0.1, make_folds(10, 3))


def test_callable_algorithm(rng):
    X, y = _data(rng, 10)
    folds = make_folds(10, 5)
    a = cv_plus_interval("least_squares", X, y, X[:1], 0.2, folds)
    b = cv_plus_interval(lambda X, y: fit_predictor("least_squares", X, y), X, y, X[:1], 0.2, folds)
    assert a == b


def test_cross_conformal_exact_matches_grid(rng):
    X, y = _data(rng, 20)
    folds = make_folds(20, 5, seed=0)
    x = np.array([[0.3]])
    exact = cross_conformal_set(Score(), X, y, x, 0.2, folds)
    grid = np.linspace(-6, 6, 4001)
    gridded = cross_conformal_set(Score(), X, y, x, 0.2, folds, y_domain=grid)
    for t in grid:
        if all(min(abs(t - lo), abs(t - hi)) > 1e-9 for lo, hi in exact.parts):
            assert exact.contains(t) == gridded.contains(t)


def test_cross_conformal_nested_in_alpha(rng):
    X, y = _data(rng, 20)
    folds = make_folds(20, 4, seed=0)
    small = cross_conformal_set(Score(), X, y, X[:1], 0.4, folds)
    big = cross_conformal_set(Score(), X, y, X[:1], 0.1, folds)
    assert small.issubset(big)


class _Parity:
    """Predicts 0 after fitting an even number of points and 1 after an odd number."""

    def __init__(self, X, y):
        self.c = float(len(y) % 2)

    def predict(self, X):
        return np.full(len(np.atleast_2d(X)), self.c)


def test_parity_algorithm_breaks_classical_jackknife():
    n = 11
    X = np.zeros((n, 1))
    y = np.zeros(n)
    S = jackknife_interval(_Parity, X, y, X[:1], 0.1, "classical")
    assert S.parts == ((1.0, 1.0),) and not S.contains(0.0)
    # jackknife+ only uses leave-one-out models, all of which predict 0
    assert jackknife_interval(_Parity, X, y, X[:1], 0.1).contains(0.0)


def test_knn_inflated_jackknife_stability_coverage(rng):
    # k-NN is (0, k/n)-stable, so the plain margin should cover at the stated level
    n, k, alpha, R = 40, 2, 0.1, 400
    hits = 0
    for _ in range(R):
        X = rng.uniform(size=(n + 1, 1))
        y = np.sin(6 * X[:, 0]) + 0.3 * rng.standard_normal(n + 1)
        S = jackknife_interval(lambda A, b: fit_predictor("knn", A, b, k=k), X[:n], y[:n], X[n:],
                               alpha, "inflated", epsilon=0.0, delta=k / n)
        hits += S.contains(y[n])
    bound = jackknife_inflated_bound(n, alpha, k / n)
    assert hits / R >= bound - 3 * math.sqrt(bound * (1 - bound) / R)
