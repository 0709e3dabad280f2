"""Permutation tests of (conditional) independence and distribution-free
confidence intervals for a regression function."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .scores import as_2d, bin_index

EXHAUSTIVE_LIMIT = 40320  # 8!


# ---------------------------------------------------------------------------
# statistics (batched over rows of a permuted-x matrix)


def abs_correlation(xs, y) -> np.ndarray:
    """Absolute Pearson correlation of each row of ``xs`` with ``y``."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    y = np.asarray(y, dtype=float)
    xc = xs - xs.mean(axis=1, keepdims=True)
    yc = y - y.mean()
    den = np.sqrt((xc ** 2).sum(axis=1) * (yc ** 2).sum())
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(den > 0, (xc @ yc) / den, 0.0)
    return np.abs(r)


def ks_two_sample(xs, y) -> np.ndarray:
    """Kolmogorov-Smirnov distance between ``y`` in the groups ``x == 1`` and ``x == 0``."""
    xs = np.atleast_2d(np.asarray(xs))
    y = np.asarray(y, dtype=float)
    order = np.argsort(y, kind="stable")
    g = xs[:, order].astype(bool)
    n1 = g.sum(axis=1, keepdims=True)
    n0 = g.shape[1] - n1
    with np.errstate(invalid="ignore", divide="ignore"):
        F1 = np.cumsum(g, axis=1) / n1
        F0 = np.cumsum(~g, axis=1) / n0
    # only compare at the last position of each run of tied y values
    ys = y[order]
    last = np.append(ys[1:] != ys[:-1], True)
    d = np.abs(F1 - F0)[:, last]
    return np.nan_to_num(d.max(axis=1))


STATISTICS = {"abs_correlation": abs_correlation, "ks_two_sample": ks_two_sample}


def _stat(T):
    if isinstance(T, str):
        try:
            return STATISTICS[T]
        except KeyError:
            raise ValueError(f"unknown statistic {T!r}") from None

    def batched(xs, y):
        return np.array([T(row, y) for row in np.atleast_2d(xs)], dtype=float)

    return batched


# ---------------------------------------------------------------------------
# permutation machinery


def _group_indices(groups) -> list[np.ndarray]:
    _, inv = np.unique(groups, return_inverse=True, axis=0)
    inv = np.asarray(inv).ravel()
    return [np.flatnonzero(inv == g) for g in range(inv.max() + 1)]


def _exhaustive_perms(n, groups):
    per_group = [list(itertools.permutations(G)) for G in groups]
    total = math.prod(len(p) for p in per_group)
    if total > EXHAUSTIVE_LIMIT:
        raise ValueError("too many permutations for exhaustive mode; pass an integer budget")
    out = np.empty((total, n), dtype=int)
    for r, combo in enumerate(itertools.product(*per_group)):
        row = np.arange(n)
        for G, perm in zip(groups, combo):
            row[G] = perm
        out[r] = row
    return out


def _sampled_perms(n, groups, M, rng):
    out = np.tile(np.arange(n), (M, 1))
    for G in groups:
        if G.size > 1:
            out[:, G] = rng.permuted(np.tile(G, (M, 1)), axis=1)
    return out


def _perm_test(x, y, groups, T, budget, alpha, seed):
    x = np.asarray(x)
    y = np.asarray(y, dtype=float)
    if x.shape[0] != y.shape[0]:
        raise ValueError("x and y must have equal lengths")
    n = y.size
    stat = _stat(T)
    t_obs = float(stat(x[None, :], y)[0])
    tol = 1e-12 * max(1.0, abs(t_obs))
    if budget == "exhaustive":
        perms = _exhaustive_perms(n, groups)
        t = stat(x[perms], y)
        p = np.count_nonzero(t >= t_obs - tol) / perms.shape[0]
    else:
        M = int(budget)
        if M < 1:
            raise ValueError("budget must be 'exhaustive' or a positive integer")
        if seed is None:
            raise ValueError("sampled permutation tests need a seed")
        rng = np.random.Generator(np.random.Philox(seed))
        t = stat(x[_sampled_perms(n, groups, M, rng)], y)
        p = (1 + np.count_nonzero(t >= t_obs - tol)) / (1 + M)
    return float(p), bool(p <= alpha)


def marginal_independence_test(x, y, T="abs_correlation", budget=999, alpha=0.05, seed=None):
    """Permutation test of ``X`` independent of ``Y``.

    Parameters
    ----------
    T : str or callable
        ``"abs_correlation"``, ``"ks_two_sample"`` or ``T(x, y) -> float``.
    budget : "exhaustive" or int
        Exhaustive enumeration (at most ``8!`` permutations) or ``M`` sampled
        permutations with the ``+1`` correction.

    Returns
    -------
    (pvalue, reject)
    """
    n = len(np.asarray(y))
    return _perm_test(x, y, [np.arange(n)], T, budget, alpha, seed)


def local_permutation_test(x, y, w, T="abs_correlation", budget=999, alpha=0.05, seed=None):
    """Test ``X`` independent of ``Y`` given a discrete ``W``.

    ``x`` is permuted only among rows sharing an identical ``w`` value.
    """
    return _perm_test(x, y, _group_indices(np.asarray(w)), T, budget, alpha, seed)


def lipschitz_inflation(L: float, h: float, n: int) -> float:
    """Type I error inflation ``L h sqrt(2n)`` of the binned local test."""
    return L * h * math.sqrt(2 * n)


def binned_local_permutation_test(x, y, w, edges, T="abs_correlation", budget=999, alpha=0.05,
                                  seed=None, L=None):
    """Local permutation test with ``x`` permuted within bins of a continuous ``W``.

    Returns
    -------
    (pvalue, reject, inflation)
        ``inflation`` is ``L h sqrt(2n)`` with ``h`` the widest bin, or ``None``
        when no Lipschitz constant ``L`` is supplied.
    """
    edges = np.asarray(edges, dtype=float)
    w = np.asarray(w, dtype=float)
    if np.any(w < edges[0]) or np.any(w > edges[-1]):
        raise ValueError("some w values fall outside the bins")
    p, rej = _perm_test(x, y, _group_indices(bin_index(edges, w)), T, budget, alpha, seed)
    infl = None if L is None else lipschitz_inflation(L, float(np.diff(edges).max()), len(w))
    return p, rej, infl


# ---------------------------------------------------------------------------
# regression confidence intervals


@dataclass
class RegressionCI:
    lo: np.ndarray
    hi: np.ndarray
    n_local: np.ndarray
    method: str

    @property
    def length(self) -> np.ndarray:
        return self.hi - self.lo

    def covers(self, mu) -> np.ndarray:
        mu = np.asarray(mu, dtype=float)
        return (self.lo <= mu) & (mu <= self.hi)


def hoeffding_interval(responses, alpha: float, a: float, b: float) -> tuple[float, float]:
    """``mean +/- (b - a) sqrt(log(2/alpha) / (2m))`` clipped to ``[a, b]``."""
    r = np.asarray(responses, dtype=float)
    if r.size == 0:
        return a, b
    rad = (b - a) * math.sqrt(math.log(2 / alpha) / (2 * r.size))
    mu = r.mean()
    return max(a, mu - rad), min(b, mu + rad)


def regression_ci(X, y, x_query, alpha: float, method: str = "discrete", *, a: float, b: float,
                  edges=None, kernel=None, B: float | None = None, seed=None) -> RegressionCI:
    """Distribution-free confidence intervals for ``E[Y | X = x]``.

    Parameters
    ----------
    method : {"discrete", "binned", "blurred"}
        ``discrete`` averages the responses with ``X_i == x``. ``binned``
        averages over the bin of ``x`` (bins given by ``edges`` on the first
        feature). ``blurred`` keeps row ``i`` when ``U_i <= H(x, X_i) / B`` with
        fresh uniforms ``U_i`` and targets the kernel-smoothed regression
        function.
    a, b : float
        Known bounds on the response.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    X = as_2d(X)
    y = np.asarray(y, dtype=float)
    if np.any(y < a) or np.any(y > b):
        raise ValueError("responses must lie in [a, b]")
    Q = as_2d(x_query)
    m = len(Q)
    lo, hi, nk = np.empty(m), np.empty(m), np.zeros(m, dtype=int)

    if method == "discrete":
        masks = [np.all(X == Q[j], axis=1) for j in range(m)]
    elif method == "binned":
        if edges is None:
            raise ValueError("binned method needs edges")
        edges = np.asarray(edges, dtype=float)
        q0 = Q[:, 0]
        if np.any(q0 < edges[0]) or np.any(q0 > edges[-1]):
            raise ValueError("query outside the declared bins")
        bx = bin_index(edges, X[:, 0])
        bq = bin_index(edges, q0)
        masks = [bx == bq[j] for j in range(m)]
    elif method == "blurred":
        if kernel is None or B is None or seed is None:
            raise ValueError("blurred method needs kernel, B and seed")
        rng = np.random.Generator(np.random.Philox(seed))
        U = rng.random(len(y))
        Hm = np.asarray(kernel(Q, X), dtype=float)
        if np.any(Hm > B * (1 + 1e-12)):
            raise ValueError("kernel exceeds its declared bound B")
        masks = [U <= Hm[j] / B for j in range(m)]
    else:
        raise ValueError(f"unknown method {method!r}")

    for j, mk in enumerate(masks):
        nk[j] = int(mk.sum())
        lo[j], hi[j] = hoeffding_interval(y[mk], alpha, a, b)
    return RegressionCI(lo, hi, nk, method)


def regression_ci_length_bound(a: float, b: float, alpha: float, K: int, n: int) -> float:
    """Expected-length bound ``2 (b - a) sqrt(log(2/alpha)) sqrt(K/n)`` for the discrete method."""
    return 2 * (b - a) * math.sqrt(math.log(2 / alpha)) * math.sqrt(K / n)
