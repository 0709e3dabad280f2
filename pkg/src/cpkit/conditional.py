"""Group-conditional (Mondrian) and selection-conditional conformal prediction."""
from __future__ import annotations

import math

import numpy as np

from .conformal import _threshold_or_inf, check_alpha, sublevel_set
from .scores import as_2d, augmented_scores, bin_index
from .sets import PredictionSet


class GroupFn:
    """Group assignment ``g(x, y)``.

    Parameters
    ----------
    fn : callable
        ``fn(x, y) -> hashable`` for a single feature vector and response.
    arity : {"features", "label", "joint"}
        Declares which arguments ``fn`` actually reads. Feature-only groups
        allow closed-form interval sets for regression scores.
    """

    def __init__(self, fn, arity: str = "joint"):
        if arity not in ("features", "label", "joint"):
            raise ValueError(f"bad arity {arity!r}")
        self.fn = fn
        self.arity = arity

    def __call__(self, x, y):
        return self.fn(x, y)

    @classmethod
    def features(cls, fn) -> "GroupFn":
        return cls(lambda x, y: fn(x), "features")

    @classmethod
    def label(cls) -> "GroupFn":
        return cls(lambda x, y: int(y), "label")

    @classmethod
    def constant(cls) -> "GroupFn":
        return cls(lambda x, y: 0, "features")


def _candidates(y_domain):
    if isinstance(y_domain, (int, np.integer)):
        return np.arange(int(y_domain)), True
    return np.sort(np.asarray(y_domain, dtype=float)), False


def _assemble(cands, mask, is_labels):
    if is_labels:
        return PredictionSet.from_labels(cands[mask])
    return PredictionSet.from_grid(cands, mask)


def mondrian_set(score, X, y, x, alpha: float, g: GroupFn, y_domain=None) -> PredictionSet:
    """Mondrian conformal prediction set.

    Each candidate ``y`` is calibrated only against training points in the
    group ``g(x, y)``. A group with no training points gets threshold
    ``+inf``, so its candidates are always included.

    ``y_domain=None`` is allowed for pretrained interval-type scores with a
    feature-only ``g``.
    """
    alpha = check_alpha(alpha)
    X = as_2d(X)
    Y = np.asarray(y, dtype=float)
    xs = as_2d(x)[:1]
    if y_domain is None:
        if not (score.is_pretrained and g.arity == "features"):
            raise ValueError("y_domain=None needs a pretrained score and a feature-only group")
        k = g(xs[0], None)
        groups = np.array([g(X[i], Y[i]) for i in range(len(Y))], dtype=object)
        q = _threshold_or_inf(score(X, Y)[groups == k], alpha)
        return sublevel_set(score, xs, q, None)

    cands, is_labels = _candidates(y_domain)
    if g.arity == "features":
        train_groups = np.array([g(X[i], None) for i in range(len(Y))], dtype=object)
    else:
        train_groups = np.array([g(X[i], Y[i]) for i in range(len(Y))], dtype=object)
    test_groups = [g(xs[0], yv) for yv in cands]  # computed once per candidate
    base = score(X, Y) if score.is_pretrained else None
    mask = np.zeros(cands.size, dtype=bool)
    for j, yv in enumerate(cands):
        if base is not None:
            S_train = base
            s_test = float(score(xs, [yv])[0])
        else:
            S = augmented_scores(score, X, Y, xs, yv)
            S_train, s_test = S[:-1], S[-1]
        q = _threshold_or_inf(S_train[train_groups == test_groups[j]], alpha)
        mask[j] = s_test <= q
    return _assemble(cands, mask, is_labels)


def label_conditional_set(score, X, y, x, alpha: float, n_labels: int) -> PredictionSet:
    """Label-conditional set: Mondrian with the group equal to the label."""
    return mondrian_set(score, X, y, x, alpha, GroupFn.label(), n_labels)


def binwise_split_thresholds(score, X_cal, y_cal, bins, alpha: float) -> np.ndarray:
    """Per-bin split conformal thresholds.

    Parameters
    ----------
    bins : array_like or (callable, int)
        Either bin edges on the first feature, or a pair ``(bin_of, K)``
        where ``bin_of(X)`` returns bin ids in ``0..K-1``.

    Returns
    -------
    ndarray of shape (K,)
        Thresholds; ``+inf`` for bins without calibration points.
    """
    alpha = check_alpha(alpha)
    if not score.is_pretrained:
        raise TypeError("bin-wise split conformal needs a pretrained score")
    X_cal = as_2d(X_cal)
    ids, K = _bin_ids(bins, X_cal)
    s = score(X_cal, y_cal)
    return np.array([_threshold_or_inf(s[ids == k], alpha) for k in range(K)])


def _bin_ids(bins, X):
    if isinstance(bins, tuple) and callable(bins[0]):
        fn, K = bins
        return np.asarray(fn(X), dtype=int), int(K)
    edges = np.asarray(bins, dtype=float)
    return bin_index(edges, X[:, 0]), edges.size - 1


def binwise_split_set(score, X_cal, y_cal, x, bins, alpha: float, y_domain=None) -> PredictionSet:
    """Bin-wise split conformal set for one test point."""
    q = binwise_split_thresholds(score, X_cal, y_cal, bins, alpha)
    ids, _ = _bin_ids(bins, as_2d(x)[:1])
    return sublevel_set(score, x, q[int(ids[0])], y_domain)


class SelectionRule:
    """A symmetric selection rule ``I(D)`` on a dataset of ``n + 1`` points.

    Parameters
    ----------
    fn : callable
        ``fn(X, y) -> bool mask`` over the rows. Must be permutation
        equivariant: permuting rows permutes the mask.
    uses_y : bool
        Set to ``False`` when ``fn`` ignores responses, which lets the
        selection be computed once instead of per candidate.
    """

    def __init__(self, fn, uses_y: bool = True):
        self.fn = fn
        self.uses_y = uses_y

    def __call__(self, X, y) -> np.ndarray:
        return np.asarray(self.fn(X, y), dtype=bool)


def selective_pvalue(scores_with_test, selected) -> float:
    """Conformal p-value computed over the selected points only.

    ``selected`` is a boolean mask over the training scores; the test point is
    assumed selected.
    """
    s = np.asarray(scores_with_test, dtype=float)
    sel = np.asarray(selected, dtype=bool)
    S = s[:-1][sel]
    return (1 + np.count_nonzero(S >= s[-1])) / (1 + S.size)


def selective_set(score, X, y, x, alpha: float, rule: SelectionRule, y_domain=None) -> PredictionSet:
    """Selection-conditional conformal set.

    A candidate ``y`` is kept when the test point is selected on the
    augmented data and its score is at most the conformal quantile of the
    selected training scores. Returns the empty set when the test point is
    never selected.
    """
    alpha = check_alpha(alpha)
    X = as_2d(X)
    Y = np.asarray(y, dtype=float)
    xs = as_2d(x)[:1]
    Xa = np.vstack([X, xs])
    n = Y.size

    if y_domain is None:
        if not (score.is_pretrained and not rule.uses_y):
            raise ValueError("y_domain=None needs a pretrained score and a rule that ignores y")
        sel = rule(Xa, np.append(Y, math.nan))
        if not sel[n]:
            return PredictionSet.empty()
        q = _threshold_or_inf(score(X, Y)[sel[:n]], alpha)
        return sublevel_set(score, xs, q, None)

    cands, is_labels = _candidates(y_domain)
    fixed_sel = None if rule.uses_y else rule(Xa, np.append(Y, math.nan))
    base = score(X, Y) if score.is_pretrained else None
    mask = np.zeros(cands.size, dtype=bool)
    for j, yv in enumerate(cands):
        ya = np.append(Y, yv)
        sel = fixed_sel if fixed_sel is not None else rule(Xa, ya)
        if not sel[n]:
            continue
        if base is not None:
            S_train, s_test = base, float(score(xs, [yv])[0])
        else:
            S = augmented_scores(score, X, Y, xs, yv)
            S_train, s_test = S[:-1], S[-1]
        mask[j] = s_test <= _threshold_or_inf(S_train[sel[:n]], alpha)
    return _assemble(cands, mask, is_labels)
