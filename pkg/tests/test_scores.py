import numpy as np
import pytest

from cpkit.scores import (
    FittedScore, HistClassProb, HistDensity, HistQuantile, KNN, LeastSquares, Score, bin_index,
    eval_score, fit_predictor, score_matrix,
)


class _Const:
    def __init__(self, c):
        self.c = c

    def predict(self, X):
        return np.full(len(np.atleast_2d(X)), float(self.c))


class _Quantiles:
    def predict_quantiles(self, X):
        n = len(np.atleast_2d(X))
        return np.full(n, -1.0), np.full(n, 1.0)


class _Proba:
    def __init__(self, P):
        self.P = np.asarray(P, dtype=float)
        self.n_labels = self.P.size

    def predict_proba(self, X):
        return np.tile(self.P, (len(np.atleast_2d(X)), 1))


def test_least_squares_exact_line():
    assert fit_predictor("least_squares", [[0.0], [1.0]], [0.0, 1.0]).predict([[2.0]])[0] == pytest.approx(2.0)


def test_least_squares_rank_deficient():
    with pytest.raises(np.linalg.LinAlgError):
        LeastSquares().fit([[1.0], [1.0], [1.0]], [1.0, 2.0, 3.0])


def test_knn_one_neighbour_interpolates(rng):
    X = rng.standard_normal((20, 2))
    y = rng.standard_normal(20)
    np.testing.assert_array_equal(KNN(1).fit(X, y).predict(X), y)


def test_knn_ties_go_to_lowest_index():
    m = KNN(1).fit([[0.0], [2.0]], [10.0, 20.0])
    assert m.predict([[1.0]])[0] == 10.0


def test_ridge_large_penalty_gives_mean(rng):
    X = rng.standard_normal((30, 3))
    X -= X.mean(axis=0)
    y = rng.standard_normal(30) + 4.0
    pred = fit_predictor("ridge", X, y, lam=1e12).predict(rng.standard_normal((5, 3)))
    np.testing.assert_allclose(pred, y.mean(), atol=1e-6)


@pytest.mark.parametrize("kind, model, y, expected", [
    ("residual", _Const(0.0), 3.0, 3.0),
    ("cqr", _Quantiles(), 0.0, -1.0),
    ("cqr", _Quantiles(), 2.0, 1.0),
])
def test_eval_score_examples(kind, model, y, expected):
    assert eval_score(FittedScore(kind, model), None, None, [[0.0]], y) == expected


def test_high_probability_certain_label():
    s = FittedScore("high_probability", _Proba([0.0, 1.0, 0.0]))
    assert eval_score(s, None, None, [[0.0]], 1) == -1.0


def test_cumulative_probability_strict():
    s = FittedScore("cumulative_probability", _Proba([0.4, 0.4, 0.2]))
    # equal-probability labels are not counted
    np.testing.assert_allclose(s([[0.0]] * 3, [0, 1, 2]), [0.0, 0.0, 0.8])


def test_label_out_of_range():
    s = FittedScore("high_probability", _Proba([0.5, 0.5]))
    with pytest.raises(ValueError):
        s([[0.0]], [2])


def test_analytic_sublevel_shapes():
    r = FittedScore("residual", _Const(1.0)).analytic_sublevel([[0.0]], 0.4)
    assert r.parts == ((0.6, 1.4),)
    c = FittedScore("cqr", _Quantiles()).analytic_sublevel([[0.0]], 0.5)
    assert c.parts == ((-1.5, 1.5),)
    assert FittedScore("cqr", _Quantiles()).analytic_sublevel([[0.0]], -2.0).kind == "empty"
    assert FittedScore("residual", _Const(1.0)).analytic_sublevel([[0.0]], np.inf).kind == "all"


def test_scaled_residual_floor():
    s = FittedScore("scaled_residual", _Const(0.0), scale_model=_Const(0.0))
    assert s([[0.0]], [1e-8])[0] == pytest.approx(1.0)


def test_pretrained_score_matrix_columns_identical(rng):
    X = rng.standard_normal((6, 1))
    y = rng.standard_normal(6)
    S = score_matrix(FittedScore("residual", _Const(0.0)), X, y, [[0.0]], np.linspace(-1, 1, 5))
    assert np.all(S[:-1] == S[:-1, :1])


def test_refit_score_matrix_matches_independent_fits(rng):
    X = rng.standard_normal((3, 1))
    y = rng.standard_normal(3)
    x = np.array([[0.3]])
    grid = np.linspace(-2, 2, 5)
    S = score_matrix(Score("residual", "least_squares"), X, y, x, grid)
    for j, yv in enumerate(grid):
        Xa, ya = np.vstack([X, x]), np.append(y, yv)
        A = np.column_stack([np.ones(4), Xa])
        coef = np.linalg.lstsq(A, ya, rcond=None)[0]
        np.testing.assert_allclose(S[:, j], np.abs(ya - A @ coef), atol=1e-12)


def test_refit_score_symmetry(rng):
    X = rng.standard_normal((8, 2))
    y = rng.standard_normal(8)
    perm = rng.permutation(8)
    for recipe in (Score("residual", "least_squares"), Score("residual", "knn", {"k": 3}),
                   Score("scaled_residual", "least_squares", scale="knn", scale_params={"k": 3})):
        S = recipe.fit(X, y)(X, y)
        Sp = recipe.fit(X[perm], y[perm])(X[perm], y[perm])
        np.testing.assert_allclose(Sp, S[perm], rtol=0, atol=1e-12)


def test_bin_index_half_open():
    edges = np.arange(11) / 10
    np.testing.assert_array_equal(bin_index(edges, [0.0, 0.1, 0.1000001, 1.0]), [0, 0, 1, 9])


def test_hist_models(rng):
    edges = np.array([0.0, 0.5, 1.0, 1.5])
    X = rng.random((200, 1))  # nothing in the last bin
    y = (rng.random(200) < X[:, 0]).astype(int)
    P = HistClassProb(edges, 2).fit(X, y).predict_proba([[0.2], [0.7], [1.2]])
    assert np.all((P >= 0) & (P <= 1))
    np.testing.assert_allclose(P.sum(axis=1), 1.0)
    np.testing.assert_allclose(P[2], [0.5, 0.5])
    lo, hi = HistQuantile(edges, 0.2).fit(X, X[:, 0]).predict_quantiles([[0.2], [1.2]])
    assert lo[0] <= hi[0] and lo[1] <= hi[1]
    d = HistDensity(edges, np.linspace(0, 1, 5)).fit(X, X[:, 0])
    assert d.density([[0.2]], [2.0])[0] == 0.0
