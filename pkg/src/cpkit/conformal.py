"""Split and full conformal prediction, conformal p-values and PAC levels."""
from __future__ import annotations

import math

import numpy as np

from .quantiles import as_sample, quantile
from .scores import as_2d, score_matrix
from .sets import PredictionSet
from .special import beta_cdf


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha


def conformal_level(n: int, alpha: float) -> float:
    """The level ``(1 - alpha)(1 + 1/n)`` used for ``n`` calibration scores."""
    if n == 0:
        return math.inf
    return (1 - alpha) * (1 + 1 / n)


def split_threshold(cal_scores, alpha: float) -> float:
    """Conformal quantile of the calibration scores.

    >>> split_threshold([0.1, 0.2, 0.3, 0.4], 0.2)
    0.4
    >>> split_threshold([0.1, 0.2, 0.3, 0.4], 0.5)
    0.3
    """
    alpha = check_alpha(alpha)
    s = as_sample(cal_scores)
    return quantile(s, conformal_level(s.size, alpha))


def _threshold_or_inf(scores, alpha):
    # like split_threshold but an empty list gives +inf
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        return math.inf
    return quantile(scores, conformal_level(scores.size, alpha))


def sublevel_set(fitted, x, q: float, y_domain=None) -> PredictionSet:
    """``{y : s(x, y) <= q}`` for a pretrained score.

    Parameters
    ----------
    fitted : FittedScore
    x : array_like
        Single feature vector.
    q : float
        Threshold, possibly ``+inf``.
    y_domain : None, int or array_like
        ``None`` uses the closed form of residual-type scores. An integer
        ``K`` means the label space ``{0, ..., K-1}``. An array is treated as
        a sorted grid of real responses.
    """
    if y_domain is None:
        out = fitted.analytic_sublevel(x, q)
        if out is None:
            raise ValueError(f"score kind {fitted.kind!r} needs an explicit y_domain")
        return out
    if q == math.inf:
        return PredictionSet.full()
    xs = as_2d(x)[:1]
    if isinstance(y_domain, (int, np.integer)):
        labels = np.arange(int(y_domain))
        s = fitted(np.repeat(xs, labels.size, axis=0), labels)
        return PredictionSet.from_labels(labels[s <= q])
    grid = np.asarray(y_domain, dtype=float)
    s = fitted(np.repeat(xs, grid.size, axis=0), grid)
    return PredictionSet.from_grid(grid, s <= q)


def split_set(score, X_cal, y_cal, x, alpha: float, y_domain=None) -> PredictionSet:
    """Split conformal prediction set for one test point."""
    if not score.is_pretrained:
        raise TypeError("split conformal needs a pretrained score")
    if len(np.asarray(y_cal)) == 0:
        raise ValueError("empty calibration set")
    q = split_threshold(score(X_cal, y_cal), alpha)
    return sublevel_set(score, x, q, y_domain)


def conformal_pvalue(scores_with_test) -> float:
    """``(1 + #{i <= n : S_i >= S_{n+1}}) / (n + 1)``; the last entry is the test score."""
    s = as_sample(scores_with_test)
    return (1 + np.count_nonzero(s[:-1] >= s[-1])) / s.size


def smoothed_pvalue(scores_with_test, xi: float) -> float:
    """Randomised p-value that is exactly uniform under exchangeability.

    ``(#{S_i > S_{n+1}} + xi * #{S_i = S_{n+1}}) / (n + 1)`` with both counts
    taken over all ``n + 1`` scores (the test score ties with itself).
    """
    if not 0 <= xi <= 1:
        raise ValueError("xi must lie in [0, 1]")
    s = as_sample(scores_with_test)
    t = s[-1]
    return (np.count_nonzero(s > t) + xi * np.count_nonzero(s == t)) / s.size


def full_pvalues(S) -> np.ndarray:
    """Conformal p-values of every column of an ``(n+1, G)`` score matrix."""
    S = np.asarray(S, dtype=float)
    return (1 + (S[:-1] >= S[-1]).sum(axis=0)) / S.shape[0]


def _full_mask(S, alpha):
    n = S.shape[0] - 1
    level = conformal_level(n, alpha)
    return np.array([S[-1, j] <= quantile(S[:-1, j], level) for j in range(S.shape[1])])


def full_set_finite(score, X, y, x, alpha: float, labels) -> PredictionSet:
    """Full conformal prediction set over a finite label space.

    ``labels`` is either the number of labels ``K`` or an explicit list.
    """
    alpha = check_alpha(alpha)
    labs = np.arange(labels) if isinstance(labels, (int, np.integer)) else np.asarray(labels)
    S = score_matrix(score, X, y, x, labs)
    return PredictionSet.from_labels(labs[_full_mask(S, alpha)])


def full_set_grid(score, X, y, x, alpha: float, grid) -> PredictionSet:
    """Full conformal evaluated on a real grid (naive; no coverage claim off the grid).

    Prefer :func:`full_set_discretized`, whose coverage guarantee covers the
    whole real line.
    """
    alpha = check_alpha(alpha)
    grid = np.sort(np.asarray(grid, dtype=float))
    S = score_matrix(score, X, y, x, grid)
    return PredictionSet.from_grid(grid, _full_mask(S, alpha))


def least_squares_coefficients(X, y, x, fit_intercept: bool = True):
    """Vectors ``a, b`` such that the fitted values on the augmented data are ``a + b y``."""
    X = as_2d(X)
    A = np.vstack([X, as_2d(x)[:1]])
    if fit_intercept:
        A = np.column_stack([np.ones(len(A)), A])
    if np.linalg.matrix_rank(A) < A.shape[1]:
        raise np.linalg.LinAlgError("augmented design is rank deficient")
    H = A @ np.linalg.solve(A.T @ A, A.T)
    n = len(X)
    a = H[:, :n] @ np.asarray(y, dtype=float)
    b = H[:, n]
    return a, b


def full_set_least_squares(X, y, x, alpha: float, fit_intercept: bool = True) -> PredictionSet:
    """Exact full conformal set for least squares with the residual score.

    The augmented residuals are affine in the hypothesised response ``y``, so
    the p-value is piecewise constant with at most ``2n`` breakpoints. Each
    cell and each breakpoint is evaluated once.
    """
    alpha = check_alpha(alpha)
    a, b = least_squares_coefficients(X, y, x, fit_intercept)
    Y = np.asarray(y, dtype=float)
    n = Y.size
    u = Y - a[:n]          # training residual is u_i + v_i * y
    v = -b[:n]
    c = 1 - b[n]           # test residual is c * y + e
    e = -a[n]

    def pvalue(t):
        t = np.atleast_1d(t)
        lhs = np.abs(u[:, None] + v[:, None] * t[None, :])
        rhs = np.abs(c * t + e)[None, :]
        return (1 + (lhs >= rhs).sum(axis=0)) / (n + 1)

    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = (e - u) / (v - c)
        r2 = (-e - u) / (v + c)
    pts = np.concatenate([r1, r2])
    pts = np.unique(pts[np.isfinite(pts)])
    if pts.size == 0:
        return PredictionSet.full() if pvalue(0.0)[0] > alpha else PredictionSet.empty()

    edges = np.concatenate([[-math.inf], pts, [math.inf]])
    mids = np.empty(pts.size + 1)
    mids[0] = pts[0] - 1 - abs(pts[0])
    mids[-1] = pts[-1] + 1 + abs(pts[-1])
    mids[1:-1] = (pts[:-1] + pts[1:]) / 2
    cell_in = pvalue(mids) > alpha
    pt_in = pvalue(pts) > alpha
    parts = [(edges[j], edges[j + 1]) for j in np.flatnonzero(cell_in)]
    parts += [(p, p) for p in pts[pt_in]]
    return PredictionSet.from_intervals(parts)


def nearest_cells(grid) -> list[tuple[float, float]]:
    """Rounding cells of nearest-grid-point rounding: midpoints between neighbours."""
    g = np.asarray(grid, dtype=float)
    mids = (g[:-1] + g[1:]) / 2
    lo = np.concatenate([[-math.inf], mids])
    hi = np.concatenate([mids, [math.inf]])
    return list(zip(lo, hi))


def round_to_grid(grid, values) -> np.ndarray:
    """Index of the nearest grid point (ties go to the lower point)."""
    g = np.asarray(grid, dtype=float)
    mids = (g[:-1] + g[1:]) / 2
    return np.searchsorted(mids, np.asarray(values, dtype=float), side="left")


def full_set_discretized(score, X, y, x, alpha: float, grid) -> PredictionSet:
    """Symmetry-preserving discretised full conformal prediction.

    All training responses are rounded to the nearest point of ``grid`` before
    fitting, and the test response is hypothesised at each grid point in turn.
    Within the rounding cell of grid point ``m`` the set is the sublevel set
    of the ``m``-th fitted score, so the score kind must have a closed-form
    sublevel set (residual, scaled residual or CQR).
    """
    alpha = check_alpha(alpha)
    grid = np.sort(np.asarray(grid, dtype=float).ravel())
    if grid.size == 0:
        raise ValueError("empty grid")
    X = as_2d(X)
    Y = np.asarray(y, dtype=float)
    n = Y.size
    Xa = np.vstack([X, as_2d(x)[:1]])
    Yr = grid[round_to_grid(grid, Y)]
    level = conformal_level(n, alpha)
    parts = []
    for m, (lo, hi) in enumerate(nearest_cells(grid)):
        fitted = score if score.is_pretrained else score.fit(Xa, np.append(Yr, grid[m]))
        q = quantile(fitted(X, Y), level)
        sub = fitted.analytic_sublevel(x, q)
        if sub is None:
            raise ValueError(f"score kind {fitted.kind!r} has no closed-form sublevel set")
        if sub.kind == "all":
            parts.append((lo, hi))
        elif sub.kind == "intervals":
            parts += [(max(a, lo), min(b, hi)) for a, b in sub.parts]
    return PredictionSet.from_intervals(parts)


def pac_level(n: int, alpha: float, delta: float, tol: float = 1e-10):
    """Adjusted level ``alpha'`` for training-conditional coverage.

    Solves ``BetaCDF(1 - alpha; (1 - alpha')(n + 1), alpha'(n + 1)) = delta``
    by bisection on ``(0, alpha]``. Split conformal run at ``alpha'`` then
    covers with probability at least ``1 - alpha`` given the calibration
    data, with probability at least ``1 - delta``.

    Returns
    -------
    alpha_prime : float
        The largest level found with ``BetaCDF(...) <= delta`` (the lower end
        of the final bisection bracket, so the guarantee is never overstated).
    solved : bool
        ``False`` when ``alpha`` itself already satisfies the condition, in
        which case no adjustment is needed and ``alpha`` is returned.
    """
    alpha = check_alpha(alpha)
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")

    def F(ap):
        return beta_cdf(1 - alpha, (1 - ap) * (n + 1), ap * (n + 1))

    if F(alpha) <= delta:
        return alpha, False
    lo, hi = 0.0, alpha  # F(lo) <= delta < F(hi)
    while hi - lo > tol * alpha:
        mid = (lo + hi) / 2
        if F(mid) <= delta:
            lo = mid
        else:
            hi = mid
    return lo, True
