"""Aggregating several prediction sets: majority vote and recalibrated vote."""
from __future__ import annotations

import math
import warnings

import numpy as np

from .conformal import check_alpha
from .risk import risk_calibrate
from .sets import PredictionSet


def majority_vote(sets, n_labels: int | None = None) -> PredictionSet:
    """Keep the points covered by strictly more than half of the input sets.

    >>> majority_vote([PredictionSet.interval(0, 2), PredictionSet.interval(1, 3),
    ...                PredictionSet.interval(4, 5)])
    PredictionSet([1, 2])
    """
    sets = list(sets)
    if not sets:
        raise ValueError("need at least one set")
    K = len(sets)
    kinds = {s.kind for s in sets} - {"all", "empty"}
    if len(kinds) > 1:
        raise ValueError("cannot mix label sets and interval sets")
    n_all = sum(s.kind == "all" for s in sets)
    if kinds == {"labels"} or (not kinds and n_labels is not None):
        universe = set().union(*(s.items for s in sets))
        if n_labels is not None:
            universe |= set(range(n_labels)) if n_all else set()
        keep = [y for y in sorted(universe) if 2 * sum(s.contains(y) for s in sets) > K]
        if n_labels is not None and len(keep) == n_labels:
            return PredictionSet.full()
        return PredictionSet.from_labels(keep)
    if not kinds:
        return PredictionSet.full() if 2 * n_all > K else PredictionSet.empty()

    pts = np.unique([e for s in sets if s.kind == "intervals" for part in s.parts for e in part
                     if math.isfinite(e)])
    if pts.size == 0:
        return PredictionSet.full() if 2 * n_all > K else PredictionSet.empty()

    def wins(t):
        return 2 * sum(s.contains(t) for s in sets) > K

    edges = np.concatenate([[-math.inf], pts, [math.inf]])
    mids = np.concatenate([[pts[0] - 1], (pts[:-1] + pts[1:]) / 2, [pts[-1] + 1]])
    parts = [(edges[j], edges[j + 1]) for j, m in enumerate(mids) if wins(m)]
    parts += [(p, p) for p in pts if wins(p)]
    return PredictionSet.from_intervals(parts)


class SetFamily:
    """Family of nested set constructors indexed by a confidence level.

    Parameters
    ----------
    members : list of callables
        ``member(x, y, lam) -> bool`` reports whether ``y`` lies in the
        ``k``-th set at confidence level ``lam`` in ``[0, 1]``.
    resolution : int
        Levels are evaluated on the dyadic grid ``j / resolution``. Each member
        is replaced by its monotone envelope (union over smaller levels), so
        membership is nondecreasing in ``lam``.
    """

    def __init__(self, members, resolution: int = 512):
        if not members:
            raise ValueError("empty family")
        self.members = list(members)
        self.grid = np.arange(resolution + 1) / resolution

    def memberships(self, x, y) -> np.ndarray:
        """Envelope membership matrix of shape ``(K, len(grid))``."""
        raw = np.array([[bool(m(x, y, lam)) for lam in self.grid] for m in self.members])
        return np.logical_or.accumulate(raw, axis=1)

    def vote_score(self, x, y) -> float:
        """``inf{lam : y in C_mv(x; lam)}``, or ``+inf`` if never included."""
        votes = self.memberships(x, y).sum(axis=0)
        hit = np.flatnonzero(2 * votes > len(self.members))
        return float(self.grid[hit[0]]) if hit.size else math.inf


def recalibrated_vote(family: SetFamily, X_cal, y_cal, alpha: float):
    """Calibrate the majority-vote level on held-out data.

    Returns
    -------
    lam_hat : float
        Smallest grid level whose empirical miscoverage is at most
        ``alpha - (1 - alpha)/n``; ``1`` (with a warning) if none is.
    construct : callable
        ``construct(x, y_domain)`` returns the aggregated set at ``lam_hat``.
        ``y_domain`` is a label count or a real grid.
    """
    alpha = check_alpha(alpha)
    X_cal = np.asarray(X_cal, dtype=float)
    y_cal = np.asarray(y_cal)
    s = np.array([family.vote_score(X_cal[i], y_cal[i]) for i in range(len(y_cal))])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        lam_hat = risk_calibrate(lambda lam: (s > lam).astype(float), alpha, grid=family.grid)
    if caught:
        warnings.warn("family never reaches the empirical target; lam_hat = 1", RuntimeWarning)
        lam_hat = 1.0

    def construct(x, y_domain):
        if isinstance(y_domain, (int, np.integer)):
            labs = [y for y in range(int(y_domain)) if family.vote_score(x, y) <= lam_hat]
            return PredictionSet.from_labels(labs)
        grid = np.sort(np.asarray(y_domain, dtype=float))
        mask = np.array([family.vote_score(x, y) <= lam_hat for y in grid])
        return PredictionSet.from_grid(grid, mask)

    return lam_hat, construct
