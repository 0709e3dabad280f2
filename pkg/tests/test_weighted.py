import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cpkit.conformal import full_set_grid, split_set, split_threshold
from cpkit.scores import FittedScore, Score
from cpkit.weighted import (
    LikelihoodRatio, check_fixed_weights, fixed_weight_set, gaussian_kernel, gaussian_sampler,
    localized_scores, localized_set, randomly_localized_set, shift_weights, weighted_full_set,
    weighted_split_set, weighted_split_threshold,
)


class _Const:
    def predict(self, X):
        return np.zeros(len(np.atleast_2d(X)))


def _data(rng, n=25):
    X = rng.uniform(-1, 1, size=(n, 1))
    return X, X[:, 0] + 0.4 * rng.standard_normal(n)


def test_unit_ratio_matches_split(rng):
    X, y = _data(rng)
    f = FittedScore("residual", _Const())
    lr = LikelihoodRatio("covariate", lambda X: np.ones(len(X)))
    for alpha in (0.1, 0.2, 0.37):
        assert weighted_split_set(f, X, y, np.array([[0.3]]), alpha, lr) == split_set(
            f, X, y, np.array([[0.3]]), alpha)


def test_unit_ratio_threshold_matches_unweighted():
    s = np.array([0.4, 0.1, 0.3, 0.2])
    w = np.full(5, 0.2)
    assert weighted_split_threshold(s, w, 0.2) == split_threshold(s, 0.2) == 0.4
    assert weighted_split_threshold(s, w, 0.5) == split_threshold(s, 0.5) == 0.3


def test_all_weight_on_test_point_gives_everything():
    s = np.array([0.4, 0.1, 0.3])
    assert weighted_split_threshold(s, [0, 0, 0, 1], 0.1) == math.inf
    f = FittedScore("residual", _Const())
    S = fixed_weight_set(f, np.zeros((3, 1)), s, np.zeros((1, 1)), 0.1, [0, 0, 0, 1])
    assert S.kind == "all"


@given(st.floats(0.01, 100.0))
def test_ratio_rescaling_is_invariant(c):
    rng = np.random.Generator(np.random.Philox(0))
    X, y = _data(rng, 15)
    f = FittedScore("residual", _Const())
    lr1 = LikelihoodRatio("covariate", lambda X: np.exp(X[:, 0]))
    lr2 = LikelihoodRatio("covariate", lambda X: c * np.exp(X[:, 0]))
    x = np.array([[0.5]])
    np.testing.assert_allclose(shift_weights(lr1, X, y, x), shift_weights(lr2, X, y, x), rtol=1e-12)
    a = weighted_split_set(f, X, y, x, 0.2, lr1)
    b = weighted_split_set(f, X, y, x, 0.2, lr2)
    assert a == b


def test_shift_weights_normalised(rng):
    X, y = _data(rng, 10)
    w = shift_weights(LikelihoodRatio("covariate", lambda X: 1 + X[:, 0] ** 2), X, y, np.array([[2.0]]))
    assert w.size == 11 and w.sum() == pytest.approx(1.0)
    assert w[-1] == w.max()


def test_negative_ratio_rejected(rng):
    X, y = _data(rng, 5)
    with pytest.raises(ValueError):
        shift_weights(LikelihoodRatio("covariate", lambda X: X[:, 0]), X, y, np.array([[-3.0]]))


def test_label_shift_needs_domain(rng):
    X, y = _data(rng, 5)
    f = FittedScore("residual", _Const())
    lr = LikelihoodRatio("label", lambda y: np.ones_like(y))
    with pytest.raises(ValueError):
        weighted_split_set(f, X, y, np.array([[0.0]]), 0.1, lr)


def test_label_shift_unit_ratio_matches_split_on_grid(rng):
    X, y = _data(rng, 20)
    f = FittedScore("residual", _Const())
    grid = np.linspace(-2, 2, 81)
    lr = LikelihoodRatio("label", lambda y: np.ones_like(y))
    a = weighted_split_set(f, X, y, np.array([[0.0]]), 0.2, lr, y_domain=grid)
    b = split_set(f, X, y, np.array([[0.0]]), 0.2, y_domain=grid)
    assert a == b


def test_weighted_full_unit_ratio_matches_full(rng):
    X, y = _data(rng, 12)
    score = Score("residual", "least_squares")
    grid = np.linspace(-3, 3, 61)
    lr = LikelihoodRatio("covariate", lambda X: np.ones(len(X)))
    a = weighted_full_set(score, X, y, np.array([[0.1]]), 0.2, lr, y_domain=grid)
    b = full_set_grid(score, X, y, np.array([[0.1]]), 0.2, grid)
    assert a == b


def test_fixed_weight_validation():
    with pytest.raises(ValueError):
        check_fixed_weights([0.5, 0.3, 0.2], 2)  # test weight below a training weight
    with pytest.raises(ValueError):
        check_fixed_weights([0.5, 0.5], 2)
    np.testing.assert_allclose(check_fixed_weights([0.2, 0.3, 0.5], 2), [0.2, 0.3, 0.5])


def test_localized_scores_constant_kernel_is_rank():
    S = np.array([0.3, 0.1, 0.2, 0.2])
    St = localized_scores(S, np.ones((4, 4)))
    np.testing.assert_allclose(St, [3 / 4, 0, 1 / 4, 1 / 4])


def test_lcp_constant_kernel_matches_full(rng):
    X, y = _data(rng, 12)
    score = Score("residual", "least_squares")
    grid = np.linspace(-3, 3, 121)
    H = lambda U, V: np.ones((len(np.atleast_2d(U)), len(np.atleast_2d(V))))
    for alpha in (0.1, 0.3):
        a = localized_set(score, X, y, np.array([[0.2]]), alpha, H, grid)
        b = full_set_grid(score, X, y, np.array([[0.2]]), alpha, grid)
        assert a == b


def test_rlcp_reproducible_and_wide_kernel_close_to_split(rng):
    X, y = _data(rng, 200)
    f = FittedScore("residual", _Const())
    x = np.array([0.0])
    a, xa = randomly_localized_set(f, X, y, x, 0.1, gaussian_kernel(0.3), gaussian_sampler(0.3), seed=0)
    b, xb = randomly_localized_set(f, X, y, x, 0.1, gaussian_kernel(0.3), gaussian_sampler(0.3), seed=0)
    assert a == b and np.array_equal(xa, xb)
    wide, _ = randomly_localized_set(f, X, y, x, 0.1, gaussian_kernel(1e6), gaussian_sampler(1e6), seed=0)
    assert wide == split_set(f, X, y, x[None, :], 0.1)


def test_rlcp_weights_follow_kernel():
    # with a tiny bandwidth only training points near x~ carry weight
    X = np.array([[0.0], [0.0], [5.0], [5.0]])
    y = np.array([0.1, 0.2, 3.0, 4.0])
    f = FittedScore("residual", _Const())
    S, xt = randomly_localized_set(f, X, y, np.array([5.0]), 0.4, gaussian_kernel(0.5),
                                   gaussian_sampler(1e-6), seed=0)
    assert abs(xt[0] - 5.0) < 1e-4
    # weights ~ (0, 0, 1/3, 1/3, 1/3): the 0.6-quantile is 4.0
    assert S.bounds() == (-4.0, 4.0)
