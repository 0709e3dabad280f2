"""Order statistics, empirical CDFs and finite-list quantiles.

All quantiles follow the ``inf{v : F(v) >= tau}`` convention: no interpolation,
``tau <= 0`` maps to ``-inf`` and ``tau > 1`` maps to ``+inf``.
"""
from __future__ import annotations

import math

import numpy as np

# Levels within this relative distance of an exact rank are snapped to it, so
# that e.g. (1 - 0.1) * (1 + 1/9) is treated as exactly 1.
_SNAP = 1e-12
WEIGHT_TOL = 1e-9


def as_sample(values) -> np.ndarray:
    """Validate a finite sample and return it as a 1-D float array."""
    z = np.asarray(values, dtype=float).ravel()
    if z.size == 0:
        raise ValueError("sample must contain at least one value")
    if not np.all(np.isfinite(z)):
        raise ValueError("sample values must be finite (no NaN or inf)")
    return z


def _sorted(z: np.ndarray) -> np.ndarray:
    # stable sort: ties keep original index order, so results are reproducible
    return np.sort(z, kind="stable")


def quantile_rank(n: int, tau: float) -> int:
    """Rank ``ceil(tau * n)`` with snapping; 0 means ``-inf``, ``n + 1`` means ``+inf``."""
    if tau > 1 + _SNAP:
        return n + 1
    m = tau * n
    if m <= 0:
        return 0
    r = round(m)
    if abs(m - r) <= _SNAP * max(1.0, m):
        k = int(r)
    else:
        k = math.ceil(m)
    return min(max(k, 1), n)


def order_statistic(values, k: int) -> float:
    """Return the ``k``-th smallest value (1-indexed).

    Examples
    --------
    >>> order_statistic([3, 2, 1, 2], 2)
    2.0
    """
    z = as_sample(values)
    if not (1 <= k <= z.size):
        raise ValueError(f"k={k} outside 1..{z.size}")
    return float(_sorted(z)[k - 1])


def empirical_cdf(values, v: float) -> float:
    """Fraction of sample values that are ``<= v``."""
    z = as_sample(values)
    if np.isnan(v):
        raise ValueError("v must not be NaN")
    return float(np.count_nonzero(z <= v)) / z.size


def quantile(values, tau: float) -> float:
    """Finite-list quantile ``inf{v : F(v) >= tau}``.

    Parameters
    ----------
    values : array_like
        Finite sample of length ``n``.
    tau : float
        Level, any real. Values above 1 give ``+inf``, values at or below 0
        give ``-inf``.

    Returns
    -------
    float
        The order statistic ``z_(ceil(tau n))`` or an infinity.
    """
    z = as_sample(values)
    k = quantile_rank(z.size, tau)
    if k == 0:
        return -math.inf
    if k > z.size:
        return math.inf
    return float(_sorted(z)[k - 1])


class WeightedEmpirical:
    """A discrete distribution ``sum_i w_i delta_{v_i}``.

    Values may include at most one ``+inf`` atom. Weights are renormalised if
    they sum to one within ``1e-9`` and rejected otherwise.
    """

    def __init__(self, values, weights):
        v = np.asarray(values, dtype=float).ravel()
        w = np.asarray(weights, dtype=float).ravel()
        if v.shape != w.shape or v.size == 0:
            raise ValueError("values and weights must be nonempty and of equal length")
        if np.isnan(v).any() or np.isnan(w).any():
            raise ValueError("NaN in weighted empirical distribution")
        if np.isneginf(v).any() or np.count_nonzero(np.isposinf(v)) > 1:
            raise ValueError("at most one +inf atom and no -inf atoms are allowed")
        if (w < 0).any() or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        total = w.sum()
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights sum to {total!r}, not 1")
        self.values = v
        self.weights = w / total

    def quantile(self, tau: float) -> float:
        return weighted_quantile(self.values, self.weights, tau)

    def cdf(self, v: float) -> float:
        return float(self.weights[self.values <= v].sum())


def weighted_quantile(values, weights, tau: float) -> float:
    """Quantile of ``sum_i w_i delta_{v_i}``: the smallest atom whose
    cumulative weight reaches ``tau``.

    Examples
    --------
    >>> weighted_quantile([1, 2, 3], [0.5, 0.25, 0.25], 0.5)
    1.0
    >>> weighted_quantile([1, 2, 3], [0.5, 0.25, 0.25], 0.6)
    2.0
    """
    if not isinstance(values, WeightedEmpirical):
        dist = WeightedEmpirical(values, weights)
    else:
        dist = values
    if tau > 1 + _SNAP:
        return math.inf
    if tau <= 0:
        return -math.inf
    order = np.argsort(dist.values, kind="stable")
    v = dist.values[order]
    cum = np.cumsum(dist.weights[order])
    idx = int(np.searchsorted(cum, tau - _SNAP * max(1.0, tau), side="left"))
    if idx >= v.size:
        return math.inf
    return float(v[idx])


def augmented_threshold_equiv(values, v_new: float, t: float) -> tuple[bool, bool]:
    """Compare the two equivalent forms of the conformal threshold check.

    Returns ``(lhs, rhs)`` where ``lhs`` tests ``v_new`` against the
    ``t``-quantile of the augmented list and ``rhs`` against the
    ``t(1 + 1/n)``-quantile of the original list. They always agree.
    """
    v = as_sample(values)
    n = v.size
    lhs = v_new <= quantile(np.append(v, v_new), t)
    rhs = v_new <= quantile(v, t * (1 + 1 / n))
    return bool(lhs), bool(rhs)
