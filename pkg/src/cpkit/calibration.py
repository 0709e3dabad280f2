"""Post-hoc calibration of binary probability forecasts and calibration-error
estimates.

Bins on ``[0, 1]`` are equal width and half-open, ``((k-1)/K, k/K]``, with
``0`` placed in the first bin.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .scores import bin_index


def unit_edges(K: int) -> np.ndarray:
    if K < 1:
        raise ValueError("K must be at least 1")
    return np.arange(K + 1) / K


def unit_bins(z, K: int) -> np.ndarray:
    """0-based bin of each ``z`` in ``[0, 1]`` for ``K`` equal-width bins."""
    return bin_index(unit_edges(K), z)


def _check_binary(y):
    y = np.asarray(y, dtype=float)
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("labels must be 0 or 1")
    return y


# ---------------------------------------------------------------------------
# isotonic regression


def pava_blocks(z, y, w=None):
    """Pool-adjacent-violators on data sorted by ``z``.

    Tied ``z`` values are pooled into one block before the main pass, so the
    fit is a function of ``z``.

    Returns
    -------
    order : ndarray
        Stable sort order of ``z``.
    bounds : list of (start, stop)
        Final blocks as slices into the sorted arrays.
    """
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=float)
    order = np.argsort(z, kind="stable")
    zs, ys, ws = z[order], y[order], w[order]
    wy = ys * ws
    # stack of blocks: [start, stop, sum(w*y), sum(w)]
    stack: list[list] = []
    i, n = 0, zs.size
    while i < n:
        j = i + 1
        while j < n and zs[j] == zs[i]:
            j += 1
        blk = [i, j, float(wy[i:j].sum()), float(ws[i:j].sum())]
        while stack and stack[-1][2] * blk[3] > blk[2] * stack[-1][3]:
            prev = stack.pop()
            blk = [prev[0], blk[1], prev[2] + blk[2], prev[3] + blk[3]]
        stack.append(blk)
        i = j
    return order, [(b[0], b[1]) for b in stack]


def isotonic_fit(z, y, w=None) -> np.ndarray:
    """Least-squares nondecreasing fit of ``y`` on ``z``, returned in input order.

    Block levels are recomputed from the raw data as ``sum(w y) / sum(w)`` so
    that they do not accumulate rounding from successive merges.

    >>> isotonic_fit([0.1, 0.2, 0.3], [1, 0, 1])
    array([0.5, 0.5, 1. ])
    """
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=float)
    order, bounds = pava_blocks(z, y, w)
    ys, ws = y[order], w[order]
    fitted_sorted = np.empty_like(ys)
    for a, b in bounds:
        fitted_sorted[a:b] = np.sum(ys[a:b] * ws[a:b]) / np.sum(ws[a:b])
    out = np.empty_like(ys)
    out[order] = fitted_sorted
    return out


# ---------------------------------------------------------------------------
# calibrators


@dataclass
class Calibrator:
    """A fitted recalibration map ``h : [0, 1] -> [0, 1]``."""

    kind: str
    params: dict = field(default_factory=dict)
    flag: str | None = None

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.kind == "binning":
            return self.params["levels"][bin_index(self.params["edges"], z)]
        if self.kind == "isotonic":
            knots, levels = self.params["knots"], self.params["levels"]
            idx = np.clip(np.searchsorted(knots, z, side="right") - 1, 0, knots.size - 1)
            return levels[idx]
        if self.kind == "temperature":
            b0, b1 = self.params["beta"]
            return _sigmoid(b0 + b1 * _logit(z))
        raise ValueError(f"unknown calibrator kind {self.kind!r}")


def _logit(z):
    z = np.clip(np.asarray(z, dtype=float), 1e-12, 1 - 1e-12)
    return np.log(z) - np.log1p(-z)


def _sigmoid(t):
    return 0.5 * (1 + np.tanh(np.asarray(t, dtype=float) / 2))


def fit_calibrator(kind: str, z, y, K: int = 10, edges=None) -> Calibrator:
    """Fit a recalibration map on forecasts ``z`` and binary labels ``y``.

    Parameters
    ----------
    kind : {"binning", "isotonic", "temperature"}
        ``binning`` uses per-bin label frequencies (``1/2`` for empty bins),
        ``isotonic`` the pool-adjacent-violators fit, and ``temperature`` the
        logistic map ``sigmoid(b0 + b1 logit(z))`` fitted by Newton's method.
    """
    z = np.asarray(z, dtype=float)
    y = _check_binary(y)
    if z.size == 0:
        raise ValueError("need at least one calibration point")
    if kind == "binning":
        edges = unit_edges(K) if edges is None else np.asarray(edges, dtype=float)
        b = bin_index(edges, z)
        nb = edges.size - 1
        sums = np.bincount(b, weights=y, minlength=nb)
        cnt = np.bincount(b, minlength=nb)
        with np.errstate(invalid="ignore", divide="ignore"):
            levels = np.where(cnt > 0, sums / cnt, 0.5)
        return Calibrator("binning", {"edges": edges, "levels": levels})
    if kind == "isotonic":
        fitted = isotonic_fit(z, y)
        knots, first = np.unique(z, return_index=True)
        return Calibrator("isotonic", {"knots": knots, "levels": fitted[first]})
    if kind == "temperature":
        return _fit_temperature(z, y)
    raise ValueError(f"unknown calibrator kind {kind!r}")


def _fit_temperature(z, y, tol=1e-10, max_iter=100, bound=50.0) -> Calibrator:
    if np.all(y == y[0]):
        # the likelihood increases without bound in the intercept
        b0 = bound if y[0] == 1 else -bound
        return Calibrator("temperature", {"beta": (b0, 0.0)}, "clamped")
    A = np.column_stack([np.ones(z.size), _logit(z)])
    beta = np.array([0.0, 1.0])
    flag = None
    for _ in range(max_iter):
        p = _sigmoid(A @ beta)
        grad = A.T @ (y - p)
        Hs = (A * (p * (1 - p))[:, None]).T @ A
        try:
            step = np.linalg.solve(Hs + 1e-12 * np.eye(2), grad)
        except np.linalg.LinAlgError:
            flag = "singular Hessian"
            break
        beta = beta + step
        if np.any(np.abs(beta) > bound):
            beta = np.clip(beta, -bound, bound)
            flag = "clamped"
        if np.max(np.abs(step)) < tol:
            break
    else:
        flag = flag or "max_iter"
    return Calibrator("temperature", {"beta": tuple(float(b) for b in beta)}, flag)


# ---------------------------------------------------------------------------
# calibration error


def binned_ece_estimate(z, y, K: int = 10, edges=None) -> float:
    """Plug-in binned ECE ``sum_k |sum_{i in bin k} (Y_i - f_i)| / n``."""
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    edges = unit_edges(K) if edges is None else np.asarray(edges, dtype=float)
    b = bin_index(edges, z)
    resid = np.bincount(b, weights=y - z, minlength=edges.size - 1)
    return float(np.abs(resid).sum() / z.size)


def binned_ece_radius(n: int, delta: float) -> float:
    """Concentration radius ``sqrt(2 log(1/delta) / n)`` of the binned ECE estimate."""
    return math.sqrt(2 * math.log(1 / delta) / n)


def binned_ece_slack(n: int, K: int) -> float:
    """Upward bias bound ``sqrt(K / n)`` of the binned ECE estimate."""
    return math.sqrt(K / n)


def ece_discrete(z, y, max_values: int | None = None) -> float:
    """ECE ``sum_v (n_v / n) |mean(Y | f = v) - v|`` for forecasts with few distinct values.

    Raises
    ------
    ValueError
        If ``z`` has more than ``max_values`` distinct values (default
        ``sqrt(n)``). Use :func:`dce_estimate` for continuous forecasts.
    """
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    vals, inv, cnt = np.unique(z, return_inverse=True, return_counts=True)
    limit = max_values if max_values is not None else max(1, int(math.sqrt(z.size)))
    if vals.size > limit:
        raise ValueError(
            f"{vals.size} distinct forecast values exceed {limit}; ECE cannot be "
            "estimated here, use dce_estimate instead"
        )
    means = np.bincount(inv, weights=y) / cnt
    return float(np.sum(cnt * np.abs(means - vals)) / z.size)


def dce_estimate(z, y, K: int, delta: float = 0.05) -> tuple[float, float]:
    """Estimate of the distance to calibration and a ``1 - delta`` upper bound.

    Returns
    -------
    estimate : float
        ``(1/n) sum_k |sum_{i : f_i in B_k} (Y_i - k/K)|``.
    upper : float
        ``estimate + 1/K + sqrt(2 log(1/delta) / n)``.
    """
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    b = unit_bins(z, K)
    resid = np.bincount(b, weights=y - (b + 1) / K, minlength=K)
    est = float(np.abs(resid).sum() / z.size)
    return est, est + 1 / K + binned_ece_radius(z.size, delta)


def venn_abers(cal_z, cal_y, test_z: float) -> tuple[float, float]:
    """Venn-Abers pair ``(p0, p1)`` for one test forecast.

    ``p_l`` is the isotonic fit at the test point after appending it with
    label ``l``. With an empty calibration set this is ``(0, 1)``.
    """
    z = np.append(np.asarray(cal_z, dtype=float), float(test_z))
    y = _check_binary(cal_y) if len(cal_y) else np.zeros(0)
    p0 = isotonic_fit(z, np.append(y, 0.0))[-1]
    p1 = isotonic_fit(z, np.append(y, 1.0))[-1]
    return float(p0), float(p1)
