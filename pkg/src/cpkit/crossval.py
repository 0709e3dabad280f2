"""Cross-conformal prediction, CV+, jackknife variants and supporting bounds."""
from __future__ import annotations

import math
import warnings

import numpy as np

from .conformal import check_alpha, conformal_level
from .quantiles import quantile
from .scores import as_2d, fit_predictor
from .sets import PredictionSet


def make_folds(n: int, K: int, seed=None) -> list[np.ndarray]:
    """Partition ``range(n)`` into ``K`` contiguous blocks after an optional seeded shuffle."""
    if not 1 <= K <= n:
        raise ValueError(f"need 1 <= K <= n, got K={K}, n={n}")
    idx = np.arange(n)
    if seed is not None:
        idx = np.random.Generator(np.random.Philox(seed)).permutation(n)
    return [np.sort(b) for b in np.array_split(idx, K)]


def _check_folds(folds, n):
    allidx = np.sort(np.concatenate(folds))
    if allidx.size != n or np.any(allidx != np.arange(n)):
        raise ValueError("folds must partition range(n)")
    if len({len(f) for f in folds}) > 1:
        warnings.warn("unequal fold sizes: the coverage bounds do not apply", RuntimeWarning)


def _as_fitter(alg):
    if isinstance(alg, str):
        return lambda X, y: fit_predictor(alg, X, y)
    return alg


def fold_predictions(alg, X, y, x, folds):
    """Leave-one-fold-out residuals and test predictions.

    Returns
    -------
    R : ndarray (n,)
        ``|Y_i - f_{-k(i)}(X_i)|``.
    mu : ndarray (n,)
        ``f_{-k(i)}(x)`` for each training index ``i``.
    """
    fit = _as_fitter(alg)
    X = as_2d(X)
    Y = np.asarray(y, dtype=float)
    n = Y.size
    _check_folds(folds, n)
    xs = as_2d(x)[:1]
    R = np.empty(n)
    mu = np.empty(n)
    for I in folds:
        keep = np.ones(n, dtype=bool)
        keep[I] = False
        model = fit(X[keep], Y[keep])
        R[I] = np.abs(Y[I] - model.predict(X[I]))
        mu[I] = model.predict(xs)[0]
    return R, mu


def cv_plus_interval(alg, X, y, x, alpha: float, folds) -> PredictionSet:
    """CV+ prediction interval.

    ``alg`` is a predictor name or a callable ``alg(X, y) -> fitted model``.
    With ``K = n`` folds this is jackknife+.
    """
    alpha = check_alpha(alpha)
    R, mu = fold_predictions(alg, X, y, x, folds)
    tau = conformal_level(R.size, alpha)
    lo = -quantile(-(mu - R), tau)
    hi = quantile(mu + R, tau)
    return PredictionSet.interval(lo, hi)


def jackknife_interval(alg, X, y, x, alpha: float, variant: str = "plus",
                       epsilon: float = 0.0, delta: float = 0.0) -> PredictionSet:
    """Jackknife prediction intervals.

    Parameters
    ----------
    variant : {"plus", "classical", "inflated"}
        ``plus`` is jackknife+. ``classical`` is ``f(x) +/- Quantile(R; 1 - alpha)``
        with leave-one-out residuals ``R``. ``inflated`` adds the stability
        parameter ``epsilon`` to the margin; under ``(epsilon, delta)``
        stability it covers with probability at least
        ``1 - alpha - 2 sqrt(delta) - 1/(n+1)``.
    """
    alpha = check_alpha(alpha)
    n = len(np.asarray(y))
    if n < 2:
        raise ValueError("jackknife needs n >= 2")
    folds = [np.array([i]) for i in range(n)]
    if variant == "plus":
        return cv_plus_interval(alg, X, y, x, alpha, folds)
    if variant not in ("classical", "inflated"):
        raise ValueError(f"unknown jackknife variant {variant!r}")
    if epsilon < 0 or not 0 <= delta <= 1:
        raise ValueError("stability parameters need epsilon >= 0 and delta in [0, 1]")
    R, _ = fold_predictions(alg, X, y, x, folds)
    f = float(_as_fitter(alg)(as_2d(X), np.asarray(y, dtype=float)).predict(as_2d(x)[:1])[0])
    q = quantile(R, 1 - alpha) + (epsilon if variant == "inflated" else 0.0)
    return PredictionSet.interval(f - q, f + q)


def jackknife_inflated_bound(n: int, alpha: float, delta: float) -> float:
    """Coverage guarantee of the inflated jackknife under stability."""
    return 1 - alpha - 2 * math.sqrt(delta) - 1 / (n + 1)


def cross_conformal_set(score, X, y, x, alpha: float, folds, y_domain=None) -> PredictionSet:
    """K-fold cross-conformal prediction set.

    Keeps ``y`` when ``sum_k sum_{i in I_k} 1{s_k(x, y) > S_i} < (1 - alpha)(n + 1)``
    where ``s_k`` is trained without fold ``k``. For residual scores with
    ``y_domain=None`` the exact union of intervals is returned.
    """
    alpha = check_alpha(alpha)
    if len(folds) < 2:
        raise ValueError("cross-conformal needs at least two folds")
    X = as_2d(X)
    Y = np.asarray(y, dtype=float)
    n = Y.size
    _check_folds(folds, n)
    xs = as_2d(x)[:1]
    fitted, S = [], np.empty(n)
    for I in folds:
        keep = np.ones(n, dtype=bool)
        keep[I] = False
        fk = score if score.is_pretrained else score.fit(X[keep], Y[keep])
        S[I] = fk(X[I], Y[I])
        fitted.append(fk)
    limit = (1 - alpha) * (n + 1)

    if y_domain is None:
        if any(f.kind != "residual" for f in fitted):
            raise ValueError("y_domain=None is supported for residual scores only")
        mu = np.empty(n)
        for I, fk in zip(folds, fitted):
            mu[I] = fk.model.predict(xs)[0]
        lo, hi = mu - S, mu + S

        def count(t):
            t = np.atleast_1d(t)
            inside = (lo[:, None] <= t[None, :]) & (t[None, :] <= hi[:, None])
            return n - inside.sum(axis=0)

        pts = np.unique(np.concatenate([lo, hi]))
        mids = np.concatenate([[pts[0] - 1 - abs(pts[0])], (pts[:-1] + pts[1:]) / 2,
                               [pts[-1] + 1 + abs(pts[-1])]])
        edges = np.concatenate([[-math.inf], pts, [math.inf]])
        cell_in = count(mids) < limit
        pt_in = count(pts) < limit
        parts = [(edges[j], edges[j + 1]) for j in np.flatnonzero(cell_in)]
        parts += [(p, p) for p in pts[pt_in]]
        return PredictionSet.from_intervals(parts)

    if isinstance(y_domain, (int, np.integer)):
        cands, is_labels = np.arange(int(y_domain)), True
    else:
        cands, is_labels = np.sort(np.asarray(y_domain, dtype=float)), False
    counts = np.zeros(cands.size)
    for I, fk in zip(folds, fitted):
        t = fk(np.repeat(xs, cands.size, axis=0), cands)
        counts += (t[None, :] > S[I][:, None]).sum(axis=0)
    mask = counts < limit
    if is_labels:
        return PredictionSet.from_labels(cands[mask])
    return PredictionSet.from_grid(cands, mask)


def cc_coverage_bound(n: int, K: int, alpha: float) -> float:
    """Coverage lower bound for K-fold cross-conformal with equal folds.

    >>> round(cc_coverage_bound(100, 5, 0.1), 10)
    0.7314285714
    """
    alpha = check_alpha(alpha)
    if K < 2 or n % K:
        raise ValueError("K must be at least 2 and divide n")
    term = min((1 - 1 / K) / (n / K + 1), (1 - K / n) / (K + 1))
    return 1 - 2 * alpha - 2 * (1 - alpha) * term


def tournament_rowsum_check(A, t: float) -> bool:
    """Check ``#{i : sum_j A_ij >= N(1 - t)} <= 2 t N`` for a tournament-like matrix."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    if not np.isin(A, (0, 1)).all() or np.any(A + A.T > 1):
        raise ValueError("A must be 0/1 with A_ij + A_ji <= 1")
    N = A.shape[0]
    return bool(tournament_count(A, t) <= 2 * t * N)


def tournament_count(A, t: float) -> int:
    """Number of rows whose sum reaches ``N(1 - t)``."""
    A = np.asarray(A)
    N = A.shape[0]
    return int(np.count_nonzero(A.sum(axis=1) >= N * (1 - t) - 1e-12))


def worst_case_tournament(N: int, alpha: float) -> np.ndarray:
    """The matrix attaining the jackknife+ lower bound, with ``m = alpha N - 1``.

    The first ``2m + 1`` rows form a regular tournament (each beats the next
    ``m`` cyclically) and beat every remaining row.
    """
    m = alpha * N - 1
    if abs(m - round(m)) > 1e-9 or round(m) < 0 or 2 * round(m) + 1 > N:
        raise ValueError("need alpha * N - 1 to be a nonnegative integer with 2m + 1 <= N")
    m = int(round(m))
    top = 2 * m + 1
    A = np.zeros((N, N), dtype=int)
    for i in range(top):
        for j in range(top):
            if 1 <= (j - i) % top <= m:
                A[i, j] = 1
        A[i, top:] = 1
    return A
