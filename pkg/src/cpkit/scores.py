"""Simple predictors and the conformal score catalog.

A score is either *pretrained* (:class:`FittedScore`, a fixed function of
``(x, y)``) or a *refit recipe* (:class:`Score`) that fits a predictor on a
dataset and returns a :class:`FittedScore`. Every recipe depends on the data
only through the multiset of rows, which is what full conformal needs.
"""
from __future__ import annotations

import math

import numpy as np

from .quantiles import quantile
from .sets import PredictionSet

SIGMA_FLOOR = 1e-8


def as_2d(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError("features must be a 1-D or 2-D array")
    return X


def bin_index(edges, v) -> np.ndarray:
    """Bin of each value for half-open bins ``(e[k-1], e[k]]``.

    The lowest edge belongs to the first bin and values outside the range are
    clipped to the end bins.
    """
    edges = np.asarray(edges, dtype=float)
    idx = np.searchsorted(edges, np.asarray(v, dtype=float), side="left") - 1
    return np.clip(idx, 0, edges.size - 2)


# ---------------------------------------------------------------------------
# predictors


class LeastSquares:
    """Ordinary least squares, optionally with an intercept column."""

    kind = "least_squares"

    def __init__(self, fit_intercept: bool = True):
        self.fit_intercept = fit_intercept

    def _design(self, X):
        X = as_2d(X)
        if self.fit_intercept:
            X = np.column_stack([np.ones(len(X)), X])
        return X

    def fit(self, X, y):
        A = self._design(X)
        self.coef_, _, rank, _ = np.linalg.lstsq(A, np.asarray(y, dtype=float), rcond=None)
        if rank < A.shape[1]:
            raise np.linalg.LinAlgError("least squares design is rank deficient")
        return self

    def predict(self, X):
        return self._design(X) @ self.coef_


class Ridge:
    """Ridge regression with an unpenalised intercept."""

    kind = "ridge"

    def __init__(self, lam: float = 1.0):
        if lam < 0:
            raise ValueError("ridge penalty must be nonnegative")
        self.lam = lam

    def fit(self, X, y):
        X = as_2d(X)
        y = np.asarray(y, dtype=float)
        xm, ym = X.mean(axis=0), y.mean()
        Xc = X - xm
        G = Xc.T @ Xc + self.lam * np.eye(X.shape[1])
        self.coef_ = np.linalg.solve(G, Xc.T @ (y - ym))
        self.intercept_ = ym - xm @ self.coef_
        return self

    def predict(self, X):
        return as_2d(X) @ self.coef_ + self.intercept_


class KNN:
    """k-nearest-neighbour mean; distance ties go to the lowest row index."""

    kind = "knn"

    def __init__(self, k: int = 5):
        if k < 1:
            raise ValueError("k must be positive")
        self.k = k

    def fit(self, X, y):
        X = as_2d(X)
        if self.k > len(X):
            raise ValueError("k exceeds the number of training rows")
        self.X_, self.y_ = X, np.asarray(y, dtype=float)
        return self

    def predict(self, X):
        X = as_2d(X)
        d = ((X[:, None, :] - self.X_[None, :, :]) ** 2).sum(axis=2)
        nn = np.argsort(d, axis=1, kind="stable")[:, : self.k]
        return self.y_[nn].mean(axis=1)


class HistQuantile:
    """Per-bin lower and upper finite-list quantiles of ``y`` given ``x[:, 0]``.

    Empty bins fall back to the pooled quantiles.
    """

    kind = "hist_quantile"

    def __init__(self, edges, alpha: float = 0.1):
        self.edges = np.asarray(edges, dtype=float)
        self.levels = (alpha / 2, 1 - alpha / 2)

    def fit(self, X, y):
        b = bin_index(self.edges, as_2d(X)[:, 0])
        y = np.asarray(y, dtype=float)
        pooled = [quantile(y, t) for t in self.levels]
        K = self.edges.size - 1
        self.table_ = np.empty((K, 2))
        for k in range(K):
            yk = y[b == k]
            self.table_[k] = [quantile(yk, t) for t in self.levels] if yk.size else pooled
        return self

    def predict_quantiles(self, X):
        b = bin_index(self.edges, as_2d(X)[:, 0])
        return self.table_[b, 0], self.table_[b, 1]

    def predict(self, X):
        lo, hi = self.predict_quantiles(X)
        return (lo + hi) / 2


class HistClassProb:
    """Per-bin label frequencies; empty bins predict the uniform distribution."""

    kind = "hist_classprob"

    def __init__(self, edges, n_labels: int = 2):
        self.edges = np.asarray(edges, dtype=float)
        self.n_labels = n_labels

    def fit(self, X, y):
        b = bin_index(self.edges, as_2d(X)[:, 0])
        y = np.asarray(y).astype(int)
        K = self.edges.size - 1
        counts = np.zeros((K, self.n_labels))
        np.add.at(counts, (b, y), 1.0)
        tot = counts.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            self.table_ = np.where(tot > 0, counts / tot, 1.0 / self.n_labels)
        return self

    def predict_proba(self, X):
        return self.table_[bin_index(self.edges, as_2d(X)[:, 0])]


class HistDensity:
    """Histogram estimate of the conditional density of ``y`` given ``x[:, 0]``.

    Empty feature bins use the uniform density on the ``y`` range. Responses
    outside the ``y`` range have density zero.
    """

    kind = "hist_density"

    def __init__(self, edges_x, edges_y):
        self.edges_x = np.asarray(edges_x, dtype=float)
        self.edges_y = np.asarray(edges_y, dtype=float)

    def fit(self, X, y):
        bx = bin_index(self.edges_x, as_2d(X)[:, 0])
        y = np.asarray(y, dtype=float)
        by = bin_index(self.edges_y, y)
        Kx, Ky = self.edges_x.size - 1, self.edges_y.size - 1
        counts = np.zeros((Kx, Ky))
        np.add.at(counts, (bx, by), 1.0)
        widths = np.diff(self.edges_y)
        tot = counts.sum(axis=1, keepdims=True)
        span = self.edges_y[-1] - self.edges_y[0]
        with np.errstate(invalid="ignore", divide="ignore"):
            self.table_ = np.where(tot > 0, counts / (tot * widths), 1.0 / span)
        return self

    def density(self, X, y):
        y = np.asarray(y, dtype=float)
        bx = bin_index(self.edges_x, as_2d(X)[:, 0])
        by = bin_index(self.edges_y, y)
        inside = (y >= self.edges_y[0]) & (y <= self.edges_y[-1])
        return np.where(inside, self.table_[bx, by], 0.0)


PREDICTORS = {
    "least_squares": LeastSquares,
    "ridge": Ridge,
    "knn": KNN,
    "hist_quantile": HistQuantile,
    "hist_classprob": HistClassProb,
    "hist_density": HistDensity,
}


def fit_predictor(kind: str, X, y, **params):
    """Fit one of the built-in predictors by name.

    >>> fit_predictor("least_squares", [[0.0], [1.0]], [0.0, 1.0]).predict([[2.0]])
    array([2.])
    """
    try:
        cls = PREDICTORS[kind]
    except KeyError:
        raise ValueError(f"unknown predictor kind {kind!r}") from None
    if len(np.asarray(y)) == 0:
        raise ValueError("cannot fit on an empty dataset")
    return cls(**params).fit(X, y)


# ---------------------------------------------------------------------------
# scores

REGRESSION_KINDS = ("residual", "scaled_residual", "cqr", "high_density")
LABEL_KINDS = ("high_probability", "cumulative_probability")


class FittedScore:
    """A pretrained score ``s(x, y)``; larger means less conforming.

    Parameters
    ----------
    kind : str
        One of ``residual``, ``scaled_residual``, ``cqr``, ``high_probability``,
        ``cumulative_probability``, ``high_density`` or ``custom``.
    model : object
        Fitted predictor supplying ``predict``, ``predict_quantiles``,
        ``predict_proba`` or ``density`` as the kind requires.
    scale_model : object, optional
        Fitted predictor of the residual scale for ``scaled_residual``.
    fn : callable, optional
        For ``custom`` scores, a vectorised ``fn(X, y) -> scores``.
    """

    is_pretrained = True

    def __init__(self, kind: str, model=None, scale_model=None, fn=None, n_labels=None):
        if kind == "custom" and fn is None:
            raise ValueError("custom scores need fn")
        self.kind = kind
        self.model = model
        self.scale_model = scale_model
        self.fn = fn
        if n_labels is None and kind in LABEL_KINDS:
            n_labels = getattr(model, "n_labels", None)
        self.n_labels = n_labels

    @classmethod
    def from_callable(cls, fn, n_labels=None) -> "FittedScore":
        return cls("custom", fn=fn, n_labels=n_labels)

    def _sigma(self, X):
        return np.maximum(self.scale_model.predict(X), SIGMA_FLOOR)

    def __call__(self, X, y) -> np.ndarray:
        X = as_2d(X)
        y = np.asarray(y, dtype=float).ravel()
        if y.size == 1 and len(X) > 1:
            y = np.full(len(X), y[0])
        k = self.kind
        if k == "custom":
            return np.asarray(self.fn(X, y), dtype=float).ravel()
        if k == "residual":
            return np.abs(y - self.model.predict(X))
        if k == "scaled_residual":
            return np.abs(y - self.model.predict(X)) / self._sigma(X)
        if k == "cqr":
            lo, hi = self.model.predict_quantiles(X)
            return np.maximum(lo - y, y - hi)
        if k == "high_density":
            return -self.model.density(X, y)
        if k in LABEL_KINDS:
            P = np.asarray(self.model.predict_proba(X), dtype=float)
            lab = y.astype(int)
            if np.any(lab != y) or np.any(lab < 0) or np.any(lab >= P.shape[1]):
                raise ValueError("label out of range for a classification score")
            p_y = P[np.arange(len(lab)), lab]
            if k == "high_probability":
                return -p_y
            # mass of labels strictly more likely than y
            return np.where(P > p_y[:, None], P, 0.0).sum(axis=1)
        raise ValueError(f"unknown score kind {k!r}")

    def analytic_sublevel(self, x, q: float) -> PredictionSet | None:
        """Closed-form ``{y : s(x, y) <= q}`` for interval-shaped scores.

        Returns ``None`` when no closed form is available.
        """
        x = as_2d(x)[:1]
        if q == math.inf:
            return PredictionSet.full() if self.kind in ("residual", "scaled_residual", "cqr") else None
        if self.kind == "residual":
            f = float(self.model.predict(x)[0])
            return PredictionSet.interval(f - q, f + q)
        if self.kind == "scaled_residual":
            f = float(self.model.predict(x)[0])
            s = float(self._sigma(x)[0])
            return PredictionSet.interval(f - q * s, f + q * s)
        if self.kind == "cqr":
            lo, hi = self.model.predict_quantiles(x)
            return PredictionSet.interval(float(lo[0]) - q, float(hi[0]) + q)
        return None


class Score:
    """A refit recipe: ``Score.fit(X, y)`` trains on the data and returns a
    :class:`FittedScore`.

    Parameters
    ----------
    kind : str
        Score kind, as for :class:`FittedScore`.
    predictor : str or callable
        Predictor name from :data:`PREDICTORS`, or a zero-argument factory
        returning an unfitted model with a ``fit`` method.
    params : dict, optional
        Keyword arguments for the named predictor.
    scale : str, optional
        Predictor name for the residual scale (``scaled_residual`` only). It
        is fitted on the absolute in-sample residuals.
    fn : callable, optional
        For ``custom`` recipes, ``fn(X, y) -> callable(X, y)``.
    """

    is_pretrained = False

    def __init__(self, kind="residual", predictor="least_squares", params=None,
                 scale=None, scale_params=None, fn=None, n_labels=None):
        self.kind = kind
        self.predictor = predictor
        self.params = dict(params or {})
        self.scale = scale
        self.scale_params = dict(scale_params or {})
        self.fn = fn
        self.n_labels = n_labels if n_labels is not None else self.params.get("n_labels")
        if kind == "scaled_residual" and scale is None:
            raise ValueError("scaled_residual recipes need a scale predictor")

    def _make(self, X, y):
        if callable(self.predictor):
            return self.predictor().fit(X, y)
        return fit_predictor(self.predictor, X, y, **self.params)

    def fit(self, X, y) -> FittedScore:
        X = as_2d(X)
        y = np.asarray(y, dtype=float)
        if self.kind == "custom":
            return FittedScore.from_callable(self.fn(X, y), n_labels=self.n_labels)
        model = self._make(X, y)
        scale_model = None
        if self.kind == "scaled_residual":
            resid = np.abs(y - model.predict(X))
            scale_model = fit_predictor(self.scale, X, resid, **self.scale_params)
        return FittedScore(self.kind, model, scale_model, n_labels=self.n_labels)


def eval_score(score, X_ctx, y_ctx, x, y) -> float:
    """Score of the point ``(x, y)``; refit recipes are trained on the context."""
    fitted = score if score.is_pretrained else score.fit(X_ctx, y_ctx)
    return float(fitted(as_2d(x)[:1], [y])[0])


def augmented_scores(score, X, y, x, y_hyp) -> np.ndarray:
    """Scores ``S_1^y..S_{n+1}^y`` of the augmented dataset for one hypothesised ``y``."""
    X = as_2d(X)
    Xa = np.vstack([X, as_2d(x)[:1]])
    ya = np.append(np.asarray(y, dtype=float), float(y_hyp))
    fitted = score if score.is_pretrained else score.fit(Xa, ya)
    return fitted(Xa, ya)


def score_matrix(score, X, y, x, y_grid) -> np.ndarray:
    """Matrix ``S[i, j] = S_i^{y_j}`` for ``i = 1..n+1`` and grid values ``y_j``."""
    y_grid = np.asarray(y_grid, dtype=float).ravel()
    X = as_2d(X)
    if score.is_pretrained:
        base = score(X, y)
        last = score(np.repeat(as_2d(x)[:1], y_grid.size, axis=0), y_grid)
        return np.vstack([np.repeat(base[:, None], y_grid.size, axis=1), last[None, :]])
    cols = []
    for yv in y_grid:
        try:
            cols.append(augmented_scores(score, X, y, x, yv))
        except Exception as exc:  # annotate which grid value failed
            raise RuntimeError(f"score fit failed at y={yv!r}: {exc}") from exc
    return np.column_stack(cols)
