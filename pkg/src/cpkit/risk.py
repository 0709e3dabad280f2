"""Conformal risk control and multiple testing with conformal p-values."""
from __future__ import annotations

import math
import warnings
from typing import Callable, NamedTuple

import numpy as np

from .conformal import check_alpha

_TOL = 1e-12


def risk_target(n: int, alpha: float) -> float:
    """Empirical risk level ``alpha - (1 - alpha)/n`` that the calibrated ``lambda`` must reach."""
    return alpha - (1 - alpha) / n


def risk_calibrate(losses: Callable[[float], np.ndarray], alpha: float, *, grid=None,
                   lam_min: float = 0.0, lam_max: float = 1.0, tol: float = 1e-9) -> float:
    """Smallest ``lambda`` whose empirical risk is at most ``alpha - (1 - alpha)/n``.

    Parameters
    ----------
    losses : callable
        ``losses(lam)`` returns the ``n`` calibration losses at ``lam``. Each
        loss must lie in ``[0, 1]`` and be nonincreasing and right-continuous
        in ``lam``, with zero loss at ``lam_max``.
    grid : array_like, optional
        Finite set of candidate values; searched exactly by bisection on
        the index. Without a grid, ``[lam_min, lam_max]`` is bisected to
        ``tol``.

    Returns
    -------
    float
        ``lambda_hat``. If the target is negative (``alpha <= 1/(n+1)``), the
        largest candidate is returned with a warning.
    """
    alpha = check_alpha(alpha)
    n = np.asarray(losses(lam_max if grid is None else np.max(grid))).size
    target = risk_target(n, alpha)

    def ok(lam):
        L = np.asarray(losses(lam), dtype=float)
        return L.mean() <= target + _TOL

    if grid is not None:
        g = np.sort(np.asarray(grid, dtype=float))
        if not ok(g[-1]):
            warnings.warn("risk target not reached on the grid; returning its maximum", RuntimeWarning)
            return float(g[-1])
        lo, hi = -1, g.size - 1  # invariant: ok(g[hi]), not ok(g[lo]) (lo=-1 virtual)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if ok(g[mid]):
                hi = mid
            else:
                lo = mid
        return float(g[hi])

    if not ok(lam_max):
        warnings.warn("risk target not reachable; returning lam_max", RuntimeWarning)
        return float(lam_max)
    if ok(lam_min):
        return float(lam_min)
    lo, hi = float(lam_min), float(lam_max)
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def miscoverage_losses(scores):
    """Loss family ``1{S_i > lam}`` and its exact candidate grid (scores and ``+inf``)."""
    s = np.asarray(scores, dtype=float)
    return (lambda lam: (s > lam).astype(float)), np.append(np.sort(s), math.inf)


def outlier_pvalues(cal_scores, test_scores) -> np.ndarray:
    """Conformal p-values ``(1 + #{j : S'_i <= S_j}) / (n + 1)`` for each test score."""
    cal = np.sort(np.asarray(cal_scores, dtype=float))
    test = np.asarray(test_scores, dtype=float)
    n = cal.size
    ge = n - np.searchsorted(cal, test, side="left")
    return (1 + ge) / (n + 1)


class RejectionSet(NamedTuple):
    indices: np.ndarray
    threshold: float


def bh_procedure(pvalues, q: float) -> RejectionSet:
    """Benjamini-Hochberg step-up procedure at target FDR ``q``.

    Rejects ``p_i <= q k/m`` with ``k = max{k : #{p_i <= q k/m} >= k}``; the
    comparison is inclusive.

    >>> bh_procedure([0.01, 0.02, 0.9], 0.1).indices
    array([0, 1])
    """
    p = np.asarray(pvalues, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    m = p.size
    if m == 0:
        return RejectionSet(np.array([], dtype=int), 0.0)
    ps = np.sort(p)
    ks = np.arange(1, m + 1)
    ok = ps <= q * ks / m
    if not ok.any():
        return RejectionSet(np.array([], dtype=int), 0.0)
    k_hat = int(ks[ok].max())
    thr = q * k_hat / m
    return RejectionSet(np.flatnonzero(p <= thr), thr)


def fwer_level(m: int, fwer_target: float) -> float:
    """Per-test level ``1 - (1 - alpha_FWER)^(1/m)`` for conformal p-values sharing a calibration set.

    >>> round(fwer_level(20, 0.1), 6)
    0.005254
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    return 1 - (1 - fwer_target) ** (1 / m)
