"""Monte Carlo verification suites.

A suite draws ``R`` independent trials, each from its own Philox stream
derived from ``(seed, trial index)``, and reduces the per-trial records to a
JSON-ready report::

    {"suite": ..., "params": ..., "estimate": ..., "band": [lo, hi],
     "pass": bool, "details": {...}}

Trial records are collected in index order before reduction, so running the
trials in parallel gives exactly the same report as running them in sequence.
"""
from __future__ import annotations

import itertools
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable

import numpy as np
from scipy import stats

from ..calibration import binned_ece_estimate, binned_ece_radius, dce_estimate, isotonic_fit, venn_abers
from ..conformal import full_set_least_squares, pac_level, smoothed_pvalue, split_set, split_threshold
from ..crossval import (
    cc_coverage_bound, cross_conformal_set, cv_plus_interval, jackknife_interval, make_folds,
    tournament_count, tournament_rowsum_check, worst_case_tournament,
)
from ..independence import (
    binned_local_permutation_test, local_permutation_test, regression_ci, regression_ci_length_bound,
)
from ..online import log_wealth_path, online_pvalues, power_schedule, run_tracker
from ..risk import bh_procedure, miscoverage_losses, outlier_pvalues, risk_calibrate
from ..scores import FittedScore, LeastSquares, Score
from ..weighted import LikelihoodRatio, weighted_split_set
from . import scenarios as sc
from .rng import generator, split_seed, trial_rng


@dataclass
class Suite:
    """A registered verification suite.

    ``trial(params, rng, index)`` must be a module-level function so that it
    can run in worker processes. ``aggregate(records, params)`` returns a dict
    with keys ``estimate``, ``band``, ``pass`` and ``details``.
    """

    name: str
    description: str
    defaults: dict
    trial: Callable[[dict, np.random.Generator, int], Any]
    aggregate: Callable[[list, dict], dict]
    prepare: Callable[[dict, int], dict] | None = None
    tags: tuple = field(default_factory=tuple)


SUITES: dict[str, Suite] = {}


def register(suite: Suite) -> Suite:
    SUITES[suite.name] = suite
    return suite


def sigma(p: float, R: int) -> float:
    """Binomial standard error ``sqrt(p (1 - p) / R)``."""
    return math.sqrt(p * (1 - p) / R)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return v


def _run_chunk(name: str, params: dict, seed: int, start: int, stop: int) -> list:
    suite = SUITES[name]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return [suite.trial(params, trial_rng(seed, i), i) for i in range(start, stop)]


def run_suite(name: str, R: int | None = None, seed: int = 0, n_jobs: int = 1, **overrides) -> dict:
    """Run a registered suite and return its report.

    Parameters
    ----------
    name : str
        Suite identifier, see :data:`SUITES`.
    R : int, optional
        Number of trials; the suite default when omitted. ``R = 0`` returns an
        empty report that does not pass.
    seed : int
        Master seed. Trial ``i`` uses the stream ``split_seed(seed, i)``.
    n_jobs : int
        Worker processes. The report does not depend on this value.
    **overrides
        Replace suite parameters.

    Raises
    ------
    KeyError
        If the suite is not registered.
    """
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; known: {', '.join(sorted(SUITES))}")
    suite = SUITES[name]
    unknown = set(overrides) - set(suite.defaults)
    if unknown:
        raise ValueError(f"unknown parameters for suite {name!r}: {sorted(unknown)}")
    params = {**suite.defaults, **overrides}
    R = int(params.pop("R") if R is None else R)
    params.pop("R", None)
    if R < 0:
        raise ValueError("R must be nonnegative")
    head = {"suite": name, "params": _jsonable({**params, "R": R, "seed": seed})}
    if R == 0:
        return {**head, "estimate": None, "band": None, "pass": False, "details": {"empty": True}}
    if suite.prepare is not None:
        params = suite.prepare(params, seed)

    if n_jobs <= 1 or R < 2:
        records = _run_chunk(name, params, seed, 0, R)
    else:
        bounds = np.linspace(0, R, min(R, 4 * n_jobs) + 1).astype(int)
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            futs = [ex.submit(_run_chunk, name, params, seed, int(a), int(b))
                    for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
            records = [r for f in futs for r in f.result()]
    out = suite.aggregate(records, params)
    return {**head, **_jsonable(out)}


# ---------------------------------------------------------------------------
# helpers shared by several suites


class _TrueMean:
    """Predictor returning the first feature (the true regression function)."""

    def predict(self, X):
        return np.asarray(X, dtype=float)[:, 0]


def _coverage_report(hits, lo, hi, **details):
    est = float(np.mean(hits))
    return {"estimate": est, "band": [lo, hi], "pass": bool(lo <= est <= hi), "details": details}


def _bits(records, key=None):
    return np.array([r if key is None else r[key] for r in records], dtype=float)


# ---------------------------------------------------------------------------
# split conformal


def _split_coverage_trial(p, rng, i):
    n, m = p["n"], p["n_train"]
    X, y, _ = sc.gaussian_linear(rng, m + n + 1, d=1)
    model = LeastSquares().fit(X[:m], y[:m])
    score = FittedScore("residual", model)
    s = split_set(score, X[m:m + n], y[m:m + n], X[-1], p["alpha"])
    return bool(s.contains(y[-1]))


def _split_coverage_agg(recs, p):
    R, a, n = len(recs), p["alpha"], p["n"]
    sd = sigma(1 - a, R)
    lo, hi = 1 - a - 3 * sd, 1 - a + 1 / (n + 1) + 3 * sd
    return _coverage_report(_bits(recs), lo, hi, sigma=sd)


register(Suite("split-coverage", "Split conformal marginal coverage sandwich",
               {"R": 10_000, "n": 99, "alpha": 0.1, "n_train": 50},
               _split_coverage_trial, _split_coverage_agg, tags=("acceptance",)))


def _beta_law_trial(p, rng, i):
    s = np.abs(rng.standard_normal(p["n"]))
    return sc.abs_normal_cdf(split_threshold(s, p["alpha"]))


def _beta_law_agg(recs, p):
    F = _bits(recs)
    n, a = p["n"], p["alpha"]
    A, B = (1 - a) * (n + 1), a * (n + 1)
    mean_t = A / (A + B)
    var_t = A * B / ((A + B) ** 2 * (A + B + 1))
    mean, var = float(F.mean()), float(F.var(ddof=1))
    ks = stats.kstest(F, stats.beta(A, B).cdf)
    ok = (abs(mean - mean_t) <= p["mean_tol"] and abs(var / var_t - 1) <= p["var_rel_tol"]
          and ks.pvalue > p["ks_level"])
    return {"estimate": mean, "band": [mean_t - p["mean_tol"], mean_t + p["mean_tol"]], "pass": ok,
            "details": {"variance": var, "variance_target": var_t, "ks_stat": float(ks.statistic),
                        "ks_pvalue": float(ks.pvalue), "beta": [A, B]}}


register(Suite("beta-law", "Training-conditional coverage follows a Beta law",
               {"R": 10_000, "n": 99, "alpha": 0.1, "mean_tol": 0.003, "var_rel_tol": 0.2,
                "ks_level": 0.001},
               _beta_law_trial, _beta_law_agg, tags=("acceptance",)))


def _pac_trial(p, rng, i):
    n = p["n"]
    a_prime, _ = pac_level(n, p["alpha"], p["delta"])
    s = np.abs(rng.standard_normal(n))
    return sc.abs_normal_cdf(split_threshold(s, a_prime)) >= 1 - p["alpha"]


def _pac_agg(recs, p):
    R, d = len(recs), p["delta"]
    return _coverage_report(_bits(recs), 1 - d - 3 * sigma(1 - d, R), 1.0)


register(Suite("pac-level", "Training-conditional guarantee of the adjusted level",
               {"R": 10_000, "n": 99, "alpha": 0.1, "delta": 0.05}, _pac_trial, _pac_agg))


def _smoothed_trial(p, rng, i):
    s = rng.integers(0, p["levels"], p["n"] + 1).astype(float)
    return smoothed_pvalue(s, rng.random())


def _smoothed_agg(recs, p):
    pv = _bits(recs)
    R = pv.size
    tau = np.arange(1, 100) / 100
    frac = (pv[:, None] <= tau[None, :]).mean(axis=0)
    z = np.abs(frac - tau) / np.sqrt(tau * (1 - tau) / R)
    zmax = float(z.max())
    return {"estimate": zmax, "band": [0.0, 3.0], "pass": zmax <= 3.0,
            "details": {"worst_tau": float(tau[z.argmax()])}}


register(Suite("smoothed-pvalue", "Smoothed p-value is exactly uniform with tied scores",
               {"R": 10_000, "n": 19, "levels": 5}, _smoothed_trial, _smoothed_agg,
               tags=("acceptance",)))


# ---------------------------------------------------------------------------
# least-squares full conformal


def _parts(S):
    if S.kind == "all":
        return [(-math.inf, math.inf)]
    if S.kind == "empty":
        return []
    return list(S.parts)


def ls_grid_oracle(X, y, x, alpha, grid):
    """Brute-force full conformal mask: refit least squares at every grid value."""
    n = len(y)
    A = np.column_stack([np.ones(n + 1), np.vstack([X, x[None, :]])])
    Yaug = np.empty((n + 1, grid.size))
    Yaug[:n] = y[:, None]
    Yaug[n] = grid
    coef, *_ = np.linalg.lstsq(A, Yaug, rcond=None)
    res = np.abs(Yaug - A @ coef)
    pv = (1 + (res[:n] >= res[n][None, :]).sum(axis=0)) / (n + 1)
    return pv > alpha


def _runs(mask):
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return []
    cuts = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate([[idx[0]], idx[cuts + 1]])
    ends = np.concatenate([idx[cuts], [idx[-1]]])
    return list(zip(starts, ends))


def _ls_full_trial(p, rng, i):
    n = int(rng.integers(p["n_min"], p["n_max"] + 1))
    d = int(rng.integers(1, p["d_max"] + 1))
    alpha = float(rng.choice([0.05, 0.1, 0.2, 0.3]))
    X, y, _ = sc.gaussian_linear(rng, n, d=d)
    x = rng.standard_normal(d)
    closed = full_set_least_squares(X, y, x[None, :], alpha)
    half = 20 * (np.std(y) + 1)
    grid = np.linspace(y.mean() - half, y.mean() + half, p["grid"])
    step = grid[1] - grid[0]
    mask = ls_grid_oracle(X, y, x, alpha, grid)
    oracle = [(grid[a], grid[b]) for a, b in _runs(mask)]
    cl = []
    for lo, hi in _parts(closed):
        lo, hi = max(lo, grid[0]), min(hi, grid[-1])
        if hi - lo >= 2 * step:
            cl.append((lo, hi))
        else:  # too short to resolve on the grid: drop oracle runs inside it
            oracle = [r for r in oracle if not (r[0] >= lo - step and r[1] <= hi + step)]
    if len(cl) != len(oracle):
        return {"match": False, "max_gap_steps": math.inf, "n_parts": len(cl)}
    gap = max((max(abs(a - c), abs(b - d)) for (a, b), (c, d) in zip(cl, oracle)), default=0.0)
    return {"match": bool(gap <= step), "max_gap_steps": float(gap / step), "n_parts": len(cl)}


def _ls_full_agg(recs, p):
    ok = [r["match"] for r in recs]
    return {"estimate": float(np.mean(ok)), "band": [1.0, 1.0], "pass": all(ok),
            "details": {"max_gap_steps": max(r["max_gap_steps"] for r in recs),
                        "max_parts": max(r["n_parts"] for r in recs)}}


register(Suite("ls-full-cp", "Closed-form least-squares full conformal set against a grid oracle",
               {"R": 100, "n_min": 8, "n_max": 40, "d_max": 2, "grid": 10_000},
               _ls_full_trial, _ls_full_agg, tags=("acceptance",)))


# ---------------------------------------------------------------------------
# cross-validation methods


def _cc_nesting_trial(p, rng, i):
    n, K = p["n"], p["K"]
    alpha = float(rng.choice([0.05, 0.1, 0.2]))
    X, y, _ = sc.gaussian_linear(rng, n + 1, d=2)
    folds = make_folds(n, K, seed=int(rng.integers(2 ** 63)))
    cc = cross_conformal_set(Score("residual", "least_squares"), X[:n], y[:n], X[n:], alpha, folds)
    cv = cv_plus_interval("least_squares", X[:n], y[:n], X[n:], alpha, folds)
    return bool(cc.issubset(cv))


def _all_true_agg(recs, p):
    ok = _bits(recs)
    return {"estimate": float(ok.mean()), "band": [1.0, 1.0], "pass": bool(ok.all()), "details": {}}


register(Suite("cc-nesting", "Cross-conformal set is contained in the CV+ interval",
               {"R": 100, "n": 40, "K": 5}, _cc_nesting_trial, _all_true_agg, tags=("acceptance",)))


def _jk_trial(p, rng, i):
    n = p["n"]
    X, y, _ = sc.gaussian_linear(rng, n + 1, d=1)
    s = jackknife_interval("least_squares", X[:n], y[:n], X[n], p["alpha"], "plus")
    return bool(s.contains(y[n]))


def _jk_agg(recs, p):
    a = p["alpha"]
    return _coverage_report(_bits(recs), 1 - 2 * a - p["tol"], 1.0)


register(Suite("jackknife-plus-coverage", "Jackknife+ covers at least 1 - 2 alpha",
               {"R": 10_000, "n": 50, "alpha": 0.1, "tol": 0.012}, _jk_trial, _jk_agg,
               tags=("acceptance",)))


def _cc_cov_trial(p, rng, i):
    n, K = p["n"], p["K"]
    X, y, _ = sc.gaussian_linear(rng, n + 1, d=1)
    folds = make_folds(n, K, seed=int(rng.integers(2 ** 63)))
    s = cross_conformal_set(Score("residual", "least_squares"), X[:n], y[:n], X[n], p["alpha"], folds)
    return bool(s.contains(y[n]))


def _cc_cov_agg(recs, p):
    R = len(recs)
    bound = cc_coverage_bound(p["n"], p["K"], p["alpha"])
    return _coverage_report(_bits(recs), bound - 3 * sigma(bound, R), 1.0, bound=bound)


register(Suite("cc-coverage", "K-fold cross-conformal coverage lower bound",
               {"R": 2_000, "n": 100, "K": 5, "alpha": 0.1}, _cc_cov_trial, _cc_cov_agg))


def _tournament_trial(p, rng, i):
    N, a = p["N"], p["alpha"]
    if i == 0:
        A = worst_case_tournament(N, a)
        return {"count": tournament_count(A, a), "holds": tournament_rowsum_check(A, a)}
    M = int(rng.integers(2, 13))
    U = np.triu(rng.random((M, M)) < 0.5, 1).astype(int)
    A = U + np.triu(1 - U, 1).T
    t = float(rng.choice([0.1, 0.2, 0.3, 0.4]))
    return {"count": None, "holds": tournament_rowsum_check(A, t)}


def _tournament_agg(recs, p):
    target = 2 * p["alpha"] * p["N"] - 1
    c = recs[0]["count"]
    ok = c == round(target) and all(r["holds"] for r in recs)
    return {"estimate": c, "band": [target, target], "pass": bool(ok),
            "details": {"random_tournaments_checked": len(recs) - 1}}


register(Suite("tournament", "Worst-case tournament attains the jackknife+ count",
               {"R": 200, "N": 10, "alpha": 0.4}, _tournament_trial, _tournament_agg,
               tags=("acceptance",)))


# ---------------------------------------------------------------------------
# weighted conformal


def _shift_trial(p, rng, i):
    X, y, xt, yt, ratio = sc.covariate_shift_pair(rng, p["n"], p["shift"])
    score = FittedScore("residual", _TrueMean())
    ws = weighted_split_set(score, X, y, xt, p["alpha"], LikelihoodRatio("covariate", ratio))
    us = split_set(score, X, y, xt, p["alpha"])
    return {"w": bool(ws.contains(yt)), "u": bool(us.contains(yt)), "inf": ws.kind == "all"}


def _shift_agg(recs, p):
    R, a = len(recs), p["alpha"]
    sd = sigma(1 - a, R)
    w, u = _bits(recs, "w").mean(), _bits(recs, "u").mean()
    lo = 1 - a - p["tol"]
    ok = w >= lo and u < 1 - a - 3 * sd
    return {"estimate": float(w), "band": [lo, 1.0], "pass": bool(ok),
            "details": {"unweighted_coverage": float(u), "undercoverage_cutoff": 1 - a - 3 * sd,
                        "infinite_sets": float(_bits(recs, "inf").mean())}}


register(Suite("weighted-shift", "Weighted conformal under known covariate shift",
               {"R": 10_000, "n": 100, "alpha": 0.1, "shift": 1.5, "tol": 0.012},
               _shift_trial, _shift_agg, tags=("acceptance",)))


# ---------------------------------------------------------------------------
# online


def _adversary(kind, B, rng, T):
    """Score streams for the tracker; adaptive ones react to the current threshold."""
    clip = lambda s: min(max(s, 0.0), B)  # noqa: E731
    if kind == 0:
        return np.zeros(T)
    if kind == 1:
        return np.full(T, float(B))
    if kind == 2:
        return np.where(np.arange(T) % 2 == 0, float(B), 0.0)
    if kind == 3:
        return B * rng.random(T)
    if kind == 4:
        return lambda t, q: float(B)
    if kind == 5:
        return lambda t, q: clip(q)
    if kind == 6:
        return lambda t, q: clip(q + 0.01)
    if kind == 7:
        return np.where((np.arange(T) // 1000) % 2 == 0, 0.0, float(B))
    if kind == 8:
        return B * rng.beta(0.2, 0.2, T)
    return lambda t, q: clip(q + 0.05 * math.sin(t / 50))


def _tracker_trial(p, rng, i):
    T, B, a = p["T"], p["B"], p["alpha"]
    stream = _adversary(i % 10, B, rng, T)
    out = {}
    for label, sched in (("constant", p["eta"]), ("power", power_schedule(1.0, p["power"]))):
        err, qs = run_tracker(stream, a, B, sched, q1=0.0, T=T)
        ts = np.arange(1, T + 1)
        eta = np.full(T, float(sched)) if label == "constant" else ts ** -float(p["power"])
        eta1 = eta[0]
        bound = (B + eta1) / (eta * ts)
        dev = np.abs(np.cumsum(err) / ts - a)
        iter_ok = bool(np.all(qs >= -a * eta1) and np.all(qs <= B + (1 - a) * eta1))
        out[label] = {"envelope": bool(np.all(dev <= bound)), "iterates": iter_ok,
                      "worst_ratio": float((dev / bound).max())}
    return out


def _tracker_agg(recs, p):
    ok = all(r[k]["envelope"] and r[k]["iterates"] for r in recs for k in r)
    worst = max(r[k]["worst_ratio"] for r in recs for k in r)
    return {"estimate": worst, "band": [0.0, 1.0], "pass": bool(ok),
            "details": {"streams": len(recs)}}


register(Suite("tracker-envelope", "Deterministic long-run coverage envelope of the quantile tracker",
               {"R": 10, "T": 100_000, "B": 1.0, "alpha": 0.1, "eta": 0.05, "power": 0.6},
               _tracker_trial, _tracker_agg, tags=("acceptance",)))


def _martingale_trial(p, rng, i):
    T, lam, a = p["T"], p["lam"], p["alpha"]
    thr = math.log(1 / a)
    null = log_wealth_path(online_pvalues(sc.drift_stream(rng, T)), lam).max() >= thr
    alt = log_wealth_path(online_pvalues(sc.drift_stream(rng, T, p["changepoint"], p["jump"])),
                          lam).max() >= thr
    return {"null": bool(null), "alt": bool(alt)}


def _martingale_agg(recs, p):
    R, a = len(recs), p["alpha"]
    rate = float(_bits(recs, "null").mean())
    hi = a + 3 * sigma(a, R)
    return {"estimate": rate, "band": [0.0, hi], "pass": rate <= hi,
            "details": {"changepoint_power": float(_bits(recs, "alt").mean())}}


register(Suite("martingale", "False-alarm rate of the exchangeability martingale",
               {"R": 10_000, "T": 1_000, "alpha": 0.05, "lam": 0.5, "changepoint": 500, "jump": 3.0},
               _martingale_trial, _martingale_agg, tags=("acceptance",)))


def _prepare_indep(p, seed):
    rng = generator(split_seed(seed, 2 ** 40))
    pairs = []
    while len(pairs) < p["pairs"]:
        t, u = sorted(int(v) for v in rng.integers(p["t_min"], p["T"] + 1, 2))
        if t < u and (t, u) not in pairs:
            pairs.append((t, u))
    return {**p, "pair_list": pairs}


def _indep_trial(p, rng, i):
    pv = online_pvalues(rng.standard_normal(p["T"]))
    times = sorted({t for pair in p["pair_list"] for t in pair})
    return {t: float(pv[t - 1]) for t in times}


def _indep_agg(recs, p):
    nb = p["bins"]
    pvals = []
    for t, u in p["pair_list"]:
        a = np.clip(np.ceil(_bits(recs, t) * nb).astype(int) - 1, 0, nb - 1)
        b = np.clip(np.ceil(_bits(recs, u) * nb).astype(int) - 1, 0, nb - 1)
        table = np.zeros((nb, nb))
        np.add.at(table, (a, b), 1)
        table = table[table.sum(1) > 0][:, table.sum(0) > 0]
        pvals.append(float(stats.chi2_contingency(table, correction=False).pvalue))
    m = len(pvals)
    adj = min(1.0, min(pvals) * m)
    return {"estimate": adj, "band": [p["level"], 1.0], "pass": adj > p["level"],
            "details": {"pairs": p["pair_list"], "pvalues": pvals}}


register(Suite("online-independence", "Online conformal p-values are independent across times",
               {"R": 10_000, "T": 200, "t_min": 10, "pairs": 20, "bins": 5, "level": 0.001},
               _indep_trial, _indep_agg, prepare=_prepare_indep, tags=("acceptance",)))


# ---------------------------------------------------------------------------
# risk control and multiple testing


def _risk_trial(p, rng, i):
    n, d = p["n"], p["d"]
    scales = 0.5 * np.arange(1, d + 1)
    res = np.abs(rng.standard_normal((n + 1, d)) * scales)
    cal, test = res[:n], res[n]
    grid = np.concatenate([[0.0], np.unique(cal)])
    lam = risk_calibrate(lambda t: (cal > t).mean(axis=1), p["alpha"], grid=grid)
    return float((test > lam).mean())


def _risk_agg(recs, p):
    L = _bits(recs)
    hi = p["alpha"] + p["tol"]
    return {"estimate": float(L.mean()), "band": [0.0, hi], "pass": bool(L.mean() <= hi),
            "details": {"loss_sd": float(L.std())}}


register(Suite("risk-control", "Conformal risk control of coordinatewise miscoverage",
               {"R": 10_000, "n": 200, "d": 5, "alpha": 0.1, "tol": 0.01},
               _risk_trial, _risk_agg, tags=("acceptance",)))


def _risk_eq_trial(p, rng, i):
    n = int(rng.integers(1, p["n_max"] + 1))
    if rng.random() < 0.5:
        alpha = float(rng.uniform(0.005, 0.5))
    else:  # levels where (1 - alpha)(n + 1) is an integer, the rounding-sensitive case
        alpha = int(rng.integers(1, max(2, (n + 1) // 2 + 1))) / (n + 1)
    s = rng.standard_normal(n) if rng.random() < 0.5 else rng.integers(0, 6, n).astype(float)
    losses, grid = miscoverage_losses(s)
    lam = risk_calibrate(losses, alpha, grid=grid)
    q = split_threshold(s, alpha)
    return lam == q


register(Suite("risk-split-equivalence", "Risk control with miscoverage loss equals split conformal",
               {"R": 1_000, "n_max": 300}, _risk_eq_trial, _all_true_agg, tags=("acceptance",)))


def _fdr_trial(p, rng, i):
    n, m, k = p["n"], p["m"], p["n_outliers"]
    cal = rng.standard_normal(n)
    test = rng.standard_normal(m)
    test[:k] += p["signal"]
    rej = bh_procedure(outlier_pvalues(cal, test), p["q"]).indices
    false = int(np.count_nonzero(rej >= k))
    return {"fdp": false / max(rej.size, 1), "power": int(np.count_nonzero(rej < k)) / k}


def _fdr_agg(recs, p):
    fdr = float(_bits(recs, "fdp").mean())
    hi = p["q"] + p["tol"]
    return {"estimate": fdr, "band": [0.0, hi], "pass": fdr <= hi,
            "details": {"power": float(_bits(recs, "power").mean())}}


register(Suite("outlier-fdr", "BH on conformal outlier p-values controls FDR",
               {"R": 2_000, "n": 500, "m": 100, "n_outliers": 20, "signal": 3.0, "q": 0.1, "tol": 0.01},
               _fdr_trial, _fdr_agg, tags=("acceptance",)))


# ---------------------------------------------------------------------------
# calibration


def brute_force_isotonic(z, y):
    """Exact monotone projection by enumerating contiguous partitions.

    Tied ``z`` values are kept in one block. The objective is compared in
    exact rational arithmetic, so inputs should be integer-valued.
    """
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    order = np.argsort(z, kind="stable")
    zs, ys = z[order], y[order]
    n = len(ys)
    cuts_allowed = [j for j in range(1, n) if zs[j] != zs[j - 1]]
    best, best_val = None, None
    yq = [Fraction(int(v)) for v in ys]
    for r in range(len(cuts_allowed) + 1):
        for cuts in itertools.combinations(cuts_allowed, r):
            b = [0, *cuts, n]
            means = [sum(yq[b[k]:b[k + 1]], Fraction(0)) / (b[k + 1] - b[k]) for k in range(len(b) - 1)]
            if any(means[k] > means[k + 1] for k in range(len(means) - 1)):
                continue
            val = sum((yq[j] - means[k]) ** 2 for k in range(len(means)) for j in range(b[k], b[k + 1]))
            if best_val is None or val < best_val:
                best, best_val = b, val
    fitted = np.empty(n)
    for a, c in zip(best[:-1], best[1:]):
        fitted[a:c] = np.sum(ys[a:c]) / (c - a)
    out = np.empty(n)
    out[order] = fitted
    return out


def _pava_trial(p, rng, i):
    n = 1 + i % p["n_max"]
    z = rng.integers(0, n + 2, n).astype(float) if i % 3 == 0 else rng.random(n)
    y = rng.integers(0, 2 if i % 2 else 5, n).astype(float)
    return bool(np.array_equal(isotonic_fit(z, y), brute_force_isotonic(z, y)))


register(Suite("pava-projection", "PAVA equals the brute-force monotone projection",
               {"R": 360, "n_max": 12}, _pava_trial, _all_true_agg, tags=("acceptance",)))


_DCE_FIXTURES = (("constant", 0.3, 0.2), ("constant", 0.5, 0.5), ("constant", 0.85, 0.6),
                 ("calibrated", None, None))


def _dce_trial(p, rng, i):
    n = p["n"]
    kind, c, mu = _DCE_FIXTURES[i % len(_DCE_FIXTURES)]
    if kind == "constant":
        z = np.full(n, c)
        y = (rng.random(n) < mu).astype(float)
        truth = abs(mu - c)
    else:
        z = rng.random(n)
        y = (rng.random(n) < z).astype(float)
        truth = 0.0
    _, upper = dce_estimate(z, y, p["K"], p["delta"])
    return {"fixture": i % len(_DCE_FIXTURES), "covered": bool(truth <= upper)}


def _dce_agg(recs, p):
    rates = []
    for k in range(len(_DCE_FIXTURES)):
        rates.append(float(np.mean([r["covered"] for r in recs if r["fixture"] == k])))
    lo = 1 - p["delta"]
    return {"estimate": min(rates), "band": [lo, 1.0], "pass": min(rates) >= lo,
            "details": {"per_fixture": rates}}


register(Suite("dce-coverage", "Upper confidence bound on the distance to calibration",
               {"R": 2_000, "n": 1_000, "K": 10, "delta": 0.05}, _dce_trial, _dce_agg,
               tags=("acceptance",)))


def _va_trial(p, rng, i):
    n = p["n"]
    z = rng.random(n + 1)
    y = (rng.random(n + 1) < z ** 2).astype(float)
    p0, p1 = venn_abers(z[:n], y[:n], z[n])
    return (p1 if y[n] == 1 else p0), float(y[n])


def _va_agg(recs, p):
    P = np.array([r[0] for r in recs])
    Y = np.array([r[1] for r in recs])
    b = np.clip(np.ceil(P * p["bins"]).astype(int) - 1, 0, p["bins"] - 1)
    zs = []
    for k in range(p["bins"]):
        m = b == k
        if m.sum() < p["min_count"]:
            continue
        sd = math.sqrt(np.sum(P[m] * (1 - P[m]))) / m.sum()
        dev = abs(Y[m].mean() - P[m].mean())
        zs.append(dev / sd if sd > 0 else (0.0 if dev == 0 else math.inf))
    if not zs:
        return {"estimate": None, "band": [0.0, 3.0], "pass": False, "details": {"bin_z": []}}
    zmax = float(max(zs))
    return {"estimate": zmax, "band": [0.0, 3.0], "pass": zmax <= 3.0,
            "details": {"bin_z": zs}}


register(Suite("venn-abers", "Venn-Abers realized probabilities are calibrated",
               {"R": 10_000, "n": 100, "bins": 10, "min_count": 50}, _va_trial, _va_agg,
               tags=("acceptance",)))


def _feps_trial(p, rng, i):
    out = []
    for eps in p["eps"]:
        z, y = sc.f_eps(rng, p["n"], eps)
        est = binned_ece_estimate(z, y, edges=[0.0, 0.5, 1.0])
        out.append(abs(est - eps / 4) <= binned_ece_radius(p["n"], p["delta"]))
    return out


def _feps_agg(recs, p):
    rates = np.mean(np.array(recs, dtype=float), axis=0)
    lo = 1 - p["delta"]
    return {"estimate": float(rates.min()), "band": [lo, 1.0], "pass": bool(rates.min() >= lo),
            "details": {"eps": p["eps"], "within_radius": rates.tolist()}}


register(Suite("binece-f-eps", "Two-bin ECE of a discontinuous forecaster is eps / 4",
               {"R": 100, "n": 100_000, "delta": 0.05, "eps": [0.1, 0.01]},
               _feps_trial, _feps_agg, tags=("acceptance",)))


# ---------------------------------------------------------------------------
# conditional independence and regression


def _local_perm_trial(p, rng, i):
    out = {}
    for label, effect in (("null", 0.0), ("alt", p["effect_alt"])):
        X, Y, W = sc.discrete_confounder(rng, p["n"], p["groups"], effect)
        _, rej = local_permutation_test(X, Y, W, budget=p["M"], alpha=p["alpha"],
                                        seed=int(rng.integers(2 ** 63)))
        out[label] = bool(rej)
    return out


def _perm_agg(recs, p, extra=0.0):
    R, a = len(recs), p["alpha"]
    rate = float(_bits(recs, "null").mean())
    hi = a + extra + 3 * sigma(a, R)
    return {"estimate": rate, "band": [0.0, hi], "pass": rate <= hi,
            "details": {"power": float(_bits(recs, "alt").mean()), "inflation": extra}}


register(Suite("local-perm-type1", "Local permutation test under a discrete confounder",
               {"R": 2_000, "n": 60, "groups": 3, "M": 199, "alpha": 0.1, "effect_alt": 0.5},
               _local_perm_trial, _perm_agg, tags=("acceptance",)))


def _binned_edges(n, rate):
    h = n ** -rate
    return np.linspace(0.0, 1.0, math.ceil(1 / h) + 1)


def _binned_perm_trial(p, rng, i):
    edges = _binned_edges(p["n"], p["h_rate"])
    out = {}
    for label, effect in (("null", 0.0), ("alt", p["effect_alt"])):
        X, Y, W = sc.smooth_confounder(rng, p["n"], p["c"], effect)
        _, rej, _ = binned_local_permutation_test(X, Y, W, edges, budget=p["M"], alpha=p["alpha"],
                                                  seed=int(rng.integers(2 ** 63)))
        out[label] = bool(rej)
    return out


def _binned_perm_agg(recs, p):
    edges = _binned_edges(p["n"], p["h_rate"])
    h = float(np.diff(edges).max())
    L = sc.smooth_confounder_lipschitz(p["c"])
    return _perm_agg(recs, p, extra=L * h * math.sqrt(2 * p["n"]))


register(Suite("binned-perm-type1", "Binned local permutation test under a smooth confounder",
               {"R": 2_000, "n": 100, "c": 1.0, "M": 199, "alpha": 0.1, "h_rate": 0.6,
                "effect_alt": 0.5},
               _binned_perm_trial, _binned_perm_agg, tags=("acceptance",)))


def _regci_trial(p, rng, i):
    n, K = p["n"], p["K"]
    X, y = sc.discrete_regression(rng, n + 1, K)
    ci = regression_ci(X[:n], y[:n], X[n:], p["alpha"], "discrete", a=0.0, b=1.0)
    mu = sc.regression_mean(X[n:], K)
    return {"miss": not bool(ci.covers(mu)[0]), "length": float(ci.length[0])}


def _regci_agg(recs, p):
    miss = float(_bits(recs, "miss").mean())
    length = float(_bits(recs, "length").mean())
    bound = regression_ci_length_bound(0.0, 1.0, p["alpha"], p["K"], p["n"])
    hi = p["alpha"] + p["tol"]
    return {"estimate": miss, "band": [0.0, hi], "pass": miss <= hi and length <= bound,
            "details": {"mean_length": length, "length_bound": bound}}


register(Suite("regression-ci", "Distribution-free confidence interval for a discrete regression",
               {"R": 10_000, "n": 2_000, "K": 10, "alpha": 0.1, "tol": 0.01},
               _regci_trial, _regci_agg, tags=("acceptance",)))


def default_suites() -> list[str]:
    """All registered suites, in registration order."""
    return list(SUITES)
