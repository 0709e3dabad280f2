"""Synthetic data generators with known population quantities.

Every generator takes an explicit :class:`numpy.random.Generator`.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import stats


def gaussian_linear(rng, n, d=1, noise=1.0, beta=None):
    """``Y = X beta + noise * eps`` with standard normal ``X`` and ``eps``.

    Returns ``X (n, d)``, ``y (n,)`` and the true mean ``mu (n,)``.
    """
    beta = np.ones(d) if beta is None else np.asarray(beta, dtype=float)
    X = rng.standard_normal((n, d))
    mu = X @ beta
    return X, mu + noise * rng.standard_normal(n), mu


def heteroscedastic_sd(x):
    """Noise scale ``0.2 + |x|`` used by :func:`heteroscedastic`."""
    return 0.2 + np.abs(x)


def heteroscedastic(rng, n, x_mean=0.0):
    """``Y = X + (0.2 + |X|) eps`` with ``X ~ N(x_mean, 1)``."""
    X = x_mean + rng.standard_normal((n, 1))
    y = X[:, 0] + heteroscedastic_sd(X[:, 0]) * rng.standard_normal(n)
    return X, y


def covariate_shift_pair(rng, n, shift=1.5):
    """Calibration data with ``X ~ N(0, 1)`` and one test point with ``X ~ N(shift, 1)``.

    Returns ``(X_cal, y_cal, x_test, y_test, ratio)`` where ``ratio(X)`` is the
    exact likelihood ratio ``exp(shift x - shift^2 / 2)``.
    """
    X, y = heteroscedastic(rng, n)
    xt, yt = heteroscedastic(rng, 1, x_mean=shift)

    def ratio(Z):
        return np.exp(shift * np.asarray(Z, dtype=float)[:, 0] - shift ** 2 / 2)

    return X, y, xt[0], float(yt[0]), ratio


def binary_logistic(rng, n, a=2.0, b=0.0):
    """Forecasts ``z ~ U(0, 1)`` and labels with ``P(Y=1 | z) = sigmoid(a logit(z) + b)``."""
    z = rng.random(n)
    t = a * (np.log(z) - np.log1p(-z)) + b
    p = 1 / (1 + np.exp(-t))
    return z, (rng.random(n) < p).astype(float), p


def finite_label(rng, n, K=3, sep=1.5):
    """Labels uniform on ``0..K-1``, feature ``X ~ N(sep * label, 1)``."""
    y = rng.integers(0, K, n)
    X = (sep * y + rng.standard_normal(n))[:, None]
    return X, y.astype(float)


def label_shift_pair(rng, n, K=3, test_probs=None):
    """Calibration labels uniform; one test label drawn from ``test_probs``."""
    test_probs = np.full(K, 1 / K) if test_probs is None else np.asarray(test_probs)
    X, y = finite_label(rng, n, K)
    yt = rng.choice(K, p=test_probs)
    xt = 1.5 * yt + rng.standard_normal()
    ratio = test_probs * K  # dQ/dP on labels
    return X, y, np.array([xt]), float(yt), (lambda lab: ratio[np.asarray(lab, dtype=int)])


def drift_stream(rng, T, changepoint=None, jump=3.0):
    """i.i.d. ``N(0, 1)`` scores, shifted by ``jump`` from ``changepoint`` onwards."""
    s = rng.standard_normal(T)
    if changepoint is not None:
        s[changepoint:] += jump
    return s


def discrete_confounder(rng, n, groups=3, effect=0.0):
    """``W`` uniform on ``groups`` values, ``X = W + eps``, ``Y = W + effect X + eps'``.

    ``effect = 0`` gives ``X`` independent of ``Y`` given ``W``.
    """
    W = rng.integers(0, groups, n).astype(float)
    X = W + rng.standard_normal(n)
    Y = W + effect * X + rng.standard_normal(n)
    return X, Y, W


def smooth_confounder(rng, n, c=1.0, effect=0.0):
    """``W ~ U(0, 1)``, ``X | W ~ N(c W, 1)``, ``Y = c W + effect X + eps``.

    The map ``w -> P(X | W = w)`` is Hellinger-Lipschitz with constant
    ``c / (2 sqrt 2)`` (see :func:`smooth_confounder_lipschitz`).
    """
    W = rng.random(n)
    X = c * W + rng.standard_normal(n)
    Y = c * W + effect * X + rng.standard_normal(n)
    return X, Y, W


def smooth_confounder_lipschitz(c):
    # d_H(N(a,1), N(b,1))^2 = 1 - exp(-(a-b)^2/8) <= (a-b)^2/8
    return abs(c) / (2 * math.sqrt(2))


def f_eps(rng, n, eps):
    """Forecasts ``f(x) = (1 - eps)/2 + eps x`` with ``X ~ U(0,1)`` and
    ``P(Y = 1 | X) = 1{0.25 < X < 0.75}``. Population binned ECE with the two
    bins ``[0, 1/2]``, ``(1/2, 1]`` is ``eps / 4``."""
    x = rng.random(n)
    y = ((x > 0.25) & (x < 0.75)).astype(float)
    return (1 - eps) / 2 + eps * x, y


def discrete_regression(rng, n, K=10):
    """``X`` uniform on ``0..K-1`` with Bernoulli responses of mean ``mu(x)``."""
    mu = regression_mean(np.arange(K), K)
    X = rng.integers(0, K, n)
    return X.astype(float), (rng.random(n) < mu[X]).astype(float)


def regression_mean(x, K=10):
    return 0.5 + 0.4 * np.sin(2 * np.pi * np.asarray(x, dtype=float) / K)


def abs_normal_cdf(q):
    """CDF of ``|Z|`` for standard normal ``Z``."""
    return 0.0 if q < 0 else 2 * stats.norm.cdf(q) - 1
