"""Weighted conformal prediction: known distribution shift, fixed weights and
kernel-localised variants."""
from __future__ import annotations

import math

import numpy as np

from .conformal import check_alpha, sublevel_set
from .conditional import _assemble, _candidates
from .quantiles import WEIGHT_TOL, quantile, weighted_quantile
from .scores import as_2d, augmented_scores
from .sets import PredictionSet


class LikelihoodRatio:
    """Likelihood ratio ``dQ/dP`` known up to a constant.

    Parameters
    ----------
    kind : {"covariate", "label", "joint"}
    fn : callable
        Vectorised ratio: ``fn(X)`` for covariate shift, ``fn(y)`` for label
        shift and ``fn(X, y)`` for a joint shift.
    """

    def __init__(self, kind: str, fn):
        if kind not in ("covariate", "label", "joint"):
            raise ValueError(f"unknown likelihood ratio kind {kind!r}")
        self.kind = kind
        self.fn = fn

    def __call__(self, X, y) -> np.ndarray:
        if self.kind == "covariate":
            r = self.fn(as_2d(X))
        elif self.kind == "label":
            r = self.fn(np.asarray(y, dtype=float))
        else:
            r = self.fn(as_2d(X), np.asarray(y, dtype=float))
        r = np.asarray(r, dtype=float).ravel()
        if np.any(r < 0) or not np.all(np.isfinite(r)):
            raise ValueError("likelihood ratio must be finite and nonnegative")
        return r


def shift_weights(lr: LikelihoodRatio, X, y, x, y_hyp=math.nan) -> np.ndarray:
    """Self-normalised weights over the ``n + 1`` augmented points."""
    Xa = np.vstack([as_2d(X), as_2d(x)[:1]])
    ya = np.append(np.asarray(y, dtype=float), y_hyp)
    r = lr(Xa, ya)
    total = r.sum()
    if total <= 0:
        raise ValueError("all likelihood ratios are zero")
    return r / total


def weighted_split_threshold(cal_scores, weights, alpha: float) -> float:
    """Quantile of ``sum_{i<=n} w_i delta_{S_i} + w_{n+1} delta_{+inf}`` at ``1 - alpha``.

    ``weights`` has length ``n + 1``; the last weight belongs to the test point.
    """
    s = np.append(np.asarray(cal_scores, dtype=float), math.inf)
    return weighted_quantile(s, weights, 1 - check_alpha(alpha))


def weighted_split_set(score, X_cal, y_cal, x, alpha: float, lr: LikelihoodRatio,
                       y_domain=None) -> PredictionSet:
    """Weighted split conformal set under a known shift."""
    if not score.is_pretrained:
        raise TypeError("weighted split conformal needs a pretrained score")
    s = score(X_cal, y_cal)
    if lr.kind == "covariate":
        q = weighted_split_threshold(s, shift_weights(lr, X_cal, y_cal, x), alpha)
        return sublevel_set(score, x, q, y_domain)
    if y_domain is None:
        raise ValueError("label or joint shifts need an explicit y_domain")
    cands, is_labels = _candidates(y_domain)
    xs = as_2d(x)[:1]
    t = score(np.repeat(xs, cands.size, axis=0), cands)
    mask = np.array([
        t[j] <= weighted_split_threshold(s, shift_weights(lr, X_cal, y_cal, xs, yv), alpha)
        for j, yv in enumerate(cands)
    ])
    return _assemble(cands, mask, is_labels)


def _weighted_full(score, X, y, x, alpha, weights_for, y_domain):
    cands, is_labels = _candidates(y_domain)
    mask = np.zeros(cands.size, dtype=bool)
    for j, yv in enumerate(cands):
        S = augmented_scores(score, X, y, x, yv)
        w = weights_for(yv)
        mask[j] = S[-1] <= weighted_quantile(S, w, 1 - alpha)
    return _assemble(cands, mask, is_labels)


def weighted_full_set(score, X, y, x, alpha: float, lr: LikelihoodRatio, y_domain=None) -> PredictionSet:
    """Weighted full conformal set.

    The weighted quantile puts weight ``w_{n+1}^y`` on the test score itself.
    With a pretrained score and a covariate shift this coincides with
    :func:`weighted_split_set`, which is used when ``y_domain`` is ``None``.
    """
    alpha = check_alpha(alpha)
    if y_domain is None:
        if not (score.is_pretrained and lr.kind == "covariate"):
            raise ValueError("y_domain=None needs a pretrained score and a covariate shift")
        return weighted_split_set(score, X, y, x, alpha, lr)
    if lr.kind == "covariate":
        w = shift_weights(lr, X, y, x)
        return _weighted_full(score, X, y, x, alpha, lambda yv: w, y_domain)
    return _weighted_full(score, X, y, x, alpha, lambda yv: shift_weights(lr, X, y, x, yv), y_domain)


def check_fixed_weights(w, n: int) -> np.ndarray:
    w = np.asarray(w, dtype=float).ravel()
    if w.size != n + 1:
        raise ValueError(f"need {n + 1} weights, got {w.size}")
    if np.any(w < 0) or abs(w.sum() - 1) > WEIGHT_TOL:
        raise ValueError("fixed weights must be nonnegative and sum to one")
    if w[-1] < w[:-1].max(initial=0.0):
        raise ValueError("the test weight must be at least every training weight")
    return w / w.sum()


def fixed_weight_set(score, X, y, x, alpha: float, w, y_domain=None) -> PredictionSet:
    """Conformal set with fixed, data-independent weights (robust to drift)."""
    alpha = check_alpha(alpha)
    w = check_fixed_weights(w, len(np.asarray(y)))
    if y_domain is None:
        if not score.is_pretrained:
            raise ValueError("y_domain=None needs a pretrained score")
        return sublevel_set(score, x, weighted_split_threshold(score(X, y), w, alpha), None)
    return _weighted_full(score, X, y, x, alpha, lambda yv: w, y_domain)


def gaussian_kernel(h: float):
    """``H(u, v) = exp(-|u - v|^2 / (2 h^2))`` as a matrix-valued callable."""

    def H(U, V):
        U, V = as_2d(U), as_2d(V)
        d2 = ((U[:, None, :] - V[None, :, :]) ** 2).sum(axis=2)
        return np.exp(-d2 / (2 * h * h))

    return H


def gaussian_sampler(h: float):
    """Exact sampler for the normalised Gaussian kernel ``N(x, h^2 I)``."""

    def sample(x, rng):
        x = np.asarray(x, dtype=float).ravel()
        return x + h * rng.standard_normal(x.size)

    return sample


def localized_scores(S, K) -> np.ndarray:
    """Recalibrated scores ``S~_i = sum_j w_ij 1{S_j < S_i}``.

    ``K[j, i] = H(X_j, X_i)``; ``w_ij`` normalises column ``i`` of ``K``.
    """
    S = np.asarray(S, dtype=float)
    col = K.sum(axis=0)
    if np.any(col <= 0):
        raise ValueError("localisation kernel has a zero row")
    W = (K / col[None, :]).T  # W[i, j] = w_ij
    less = S[None, :] < S[:, None]  # less[i, j] = 1{S_j < S_i}
    return (W * less).sum(axis=1)


def localized_set(score, X, y, x, alpha: float, H, y_domain) -> PredictionSet:
    """Localised conformal prediction (LCP) with kernel ``H``.

    ``H(U, V)`` returns the matrix of kernel values ``H(U_a, V_b)``.
    """
    alpha = check_alpha(alpha)
    Xa = np.vstack([as_2d(X), as_2d(x)[:1]])
    K = np.asarray(H(Xa, Xa), dtype=float)
    cands, is_labels = _candidates(y_domain)
    mask = np.zeros(cands.size, dtype=bool)
    for j, yv in enumerate(cands):
        St = localized_scores(augmented_scores(score, X, y, x, yv), K)
        mask[j] = St[-1] <= quantile(St, 1 - alpha)
    return _assemble(cands, mask, is_labels)


def randomly_localized_set(score, X, y, x, alpha: float, H, sampler, seed, y_domain=None):
    """Randomly-localised conformal prediction (RLCP).

    Draws ``x~`` from ``H(x, .)`` with the caller's exact ``sampler``, then runs
    weighted conformal with weights proportional to ``H(X_i, x~)``.

    Returns
    -------
    (PredictionSet, ndarray)
        The set and the sampled localisation point ``x~``.
    """
    alpha = check_alpha(alpha)
    rng = np.random.Generator(np.random.Philox(seed))
    x_tilde = np.asarray(sampler(np.asarray(x, dtype=float).ravel(), rng), dtype=float)
    Xa = np.vstack([as_2d(X), as_2d(x)[:1]])
    r = np.asarray(H(Xa, x_tilde[None, :]), dtype=float).ravel()
    if r.sum() <= 0:
        raise ValueError("all kernel weights are zero")
    w = r / r.sum()
    if y_domain is None:
        if not score.is_pretrained:
            raise ValueError("y_domain=None needs a pretrained score")
        q = weighted_split_threshold(score(X, y), w, alpha)
        return sublevel_set(score, x, q, None), x_tilde
    return _weighted_full(score, X, y, x, alpha, lambda yv: w, y_domain), x_tilde
