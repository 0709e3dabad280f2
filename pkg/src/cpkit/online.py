"""Online conformal prediction: sequential p-values, exchangeability
martingales and the quantile tracker."""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np



# ---------------------------------------------------------------------------
# online p-values


def online_pvalues(scores, xi=None) -> np.ndarray:
    """p-values ``p_t = #{i <= t : s_i >= s_t} / t`` for a pretrained score stream.

    Parameters
    ----------
    scores : array_like
        Scores in arrival order.
    xi : array_like, optional
        Per-step uniforms for the smoothed version
        ``(#{s_i > s_t} + xi_t #{s_i = s_t}) / t``.
    """
    s = np.asarray(scores, dtype=float).ravel()
    out = np.empty(s.size)
    seen: list[float] = []
    for t, v in enumerate(s, start=1):
        bisect.insort(seen, v)
        lo = bisect.bisect_left(seen, v)
        if xi is None:
            out[t - 1] = (t - lo) / t
        else:
            hi = bisect.bisect_right(seen, v)
            out[t - 1] = (t - hi + xi[t - 1] * (hi - lo)) / t
    return out


class StreamState:
    """History of an online conformal stream.

    With a pretrained score each step costs ``O(t)`` in the worst case through
    a sorted list of past scores. With a refit recipe every step refits on all
    ``t`` points and rescores them.
    """

    def __init__(self, score):
        self.score = score
        self.X: list[np.ndarray] = []
        self.y: list[float] = []
        self.sorted_scores: list[float] = []
        self.pvalues: list[float] = []
        self._t = 0

    @property
    def t(self) -> int:
        return self._t

    def snapshot(self) -> dict:
        """Resumable state of a pretrained-score stream (past scores only)."""
        if not self.score.is_pretrained:
            raise TypeError("only pretrained-score streams can be snapshotted")
        return {"t": self._t, "sorted_scores": list(self.sorted_scores)}

    @classmethod
    def restore(cls, score, snap: dict) -> "StreamState":
        state = cls(score)
        if not score.is_pretrained:
            raise TypeError("only pretrained-score streams can be restored")
        state.sorted_scores = sorted(float(v) for v in snap["sorted_scores"])
        state._t = int(snap["t"])
        if state._t != len(state.sorted_scores):
            raise ValueError("snapshot is inconsistent: t differs from the number of scores")
        return state

    def step(self, x, y, xi=None) -> float:
        x = np.asarray(x, dtype=float).ravel()
        self._t += 1
        t = self._t
        if self.score.is_pretrained:
            v = float(self.score(x[None, :], [y])[0])
            bisect.insort(self.sorted_scores, v)
            lo = bisect.bisect_left(self.sorted_scores, v)
            hi = bisect.bisect_right(self.sorted_scores, v)
        else:
            self.X.append(x)
            self.y.append(float(y))
            X = np.vstack(self.X)
            Y = np.asarray(self.y)
            S = self.score.fit(X, Y)(X, Y)
            lo = int(np.count_nonzero(S < S[-1]))
            hi = int(np.count_nonzero(S <= S[-1]))
        if xi is None:
            p = (t - lo) / t
        else:
            if not 0 <= xi <= 1:
                raise ValueError("xi must lie in [0, 1]")
            p = (t - hi + xi * (hi - lo)) / t
        self.pvalues.append(p)
        return p


def online_pvalue_step(state: StreamState, x, y, xi=None) -> float:
    """Append ``(x, y)`` to the stream and return its online conformal p-value."""
    return state.step(x, y, xi)


# ---------------------------------------------------------------------------
# exchangeability martingales


def power_betting(lam: float) -> Callable[[float], float]:
    """Betting function ``f(r) = (1 - lam r) / (1 - lam / 2)`` for ``lam`` in ``[0, 1]``."""
    if not 0 <= lam <= 1:
        raise ValueError("lam must lie in [0, 1]")
    return lambda r: (1 - lam * r) / (1 - lam / 2)


def validate_betting(f, n_grid: int = 20001, tol: float = 1e-6) -> None:
    """Check that ``f`` is nonnegative, nonincreasing and integrates to at most one."""
    r = np.linspace(0.0, 1.0, n_grid)
    v = np.array([f(ri) for ri in r], dtype=float)
    if np.any(v < 0) or np.any(np.diff(v) > tol):
        raise ValueError("betting function must be nonnegative and nonincreasing")
    integral = float(np.sum((v[1:] + v[:-1]) / 2) / (n_grid - 1))
    if integral > 1 + tol:
        raise ValueError(f"betting function integrates to {integral:.8f} > 1")


@dataclass(frozen=True)
class MartingaleState:
    """Wealth of a conformal test martingale, stored as ``log M_t``."""

    alpha: float = 0.05
    lam: float = 0.5
    log_wealth: float = 0.0
    t: int = 0
    alarm: bool = False
    ever_alarmed: bool = False

    @property
    def wealth(self) -> float:
        return math.exp(self.log_wealth)


def martingale_update(state: MartingaleState, p: float, f=None) -> MartingaleState:
    """Multiply the wealth by ``f(p)``; raise the alarm once ``M_t >= 1/alpha``."""
    f = f or power_betting(state.lam)
    v = f(p)
    if v < 0:
        raise ValueError("betting function returned a negative value")
    lw = state.log_wealth + (math.log(v) if v > 0 else -math.inf)
    alarm = lw >= math.log(1 / state.alpha)
    return replace(state, log_wealth=lw, t=state.t + 1, alarm=alarm,
                   ever_alarmed=state.ever_alarmed or alarm)


def log_wealth_path(pvalues, lam: float) -> np.ndarray:
    """Vectorised ``log M_t`` for the power betting function."""
    p = np.asarray(pvalues, dtype=float)
    with np.errstate(divide="ignore"):
        return np.cumsum(np.log1p(-lam * p) - math.log1p(-lam / 2))


# ---------------------------------------------------------------------------
# quantile tracking


def power_schedule(eta0: float = 1.0, power: float = 0.6) -> Callable[[int], float]:
    """Step sizes ``eta_t = eta0 * t ** (-power)``."""
    return lambda t: eta0 * t ** (-power)


def _eta(schedule, t: int) -> float:
    return float(schedule(t)) if callable(schedule) else float(schedule)


@dataclass(frozen=True)
class TrackerState:
    """State of the online quantile tracker."""

    alpha: float
    B: float
    schedule: object = 0.05
    q: float = 0.0
    t: int = 1
    n_err: int = 0
    history: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if _eta(self.schedule, 1) <= 0:
            raise ValueError("step sizes must be positive")


def tracker_step(state: TrackerState, score: float) -> tuple[bool, TrackerState]:
    """One tracker update; returns ``(covered, new_state)``."""
    if not 0 <= score <= state.B:
        raise ValueError(f"score {score} outside [0, {state.B}]")
    err = score > state.q
    q = state.q + _eta(state.schedule, state.t) * (int(err) - state.alpha)
    return (not err), replace(state, q=q, t=state.t + 1, n_err=state.n_err + int(err))


def run_tracker(scores, alpha: float, B: float, schedule=0.05, q1: float = 0.0, T=None):
    """Run the tracker over a stream.

    Parameters
    ----------
    scores : array_like or callable
        Scores in ``[0, B]``, or an adaptive adversary ``scores(t, q_t)``.
    T : int, optional
        Stream length when ``scores`` is callable.

    Returns
    -------
    err : ndarray of bool
    q : ndarray
        The thresholds ``q_1..q_T`` used at each step.
    """
    adaptive = callable(scores)
    if not adaptive:
        scores = np.asarray(scores, dtype=float)
        T = scores.size
    err = np.zeros(T, dtype=bool)
    qs = np.empty(T)
    q = float(q1)
    const = not callable(schedule)
    for i in range(T):
        t = i + 1
        s = scores(t, q) if adaptive else scores[i]
        if not 0 <= s <= B:
            raise ValueError(f"score {s} outside [0, {B}] at t={t}")
        qs[i] = q
        e = s > q
        err[i] = e
        q += (schedule if const else schedule(t)) * (e - alpha)
    return err, qs


def tracker_longrun_bound(B: float, schedule, T: int) -> float:
    """Deterministic bound ``(B + eta_1) / (eta_T T)`` on ``|mean err - alpha|``.

    >>> round(tracker_longrun_bound(1.0, 0.1, 1000), 12)
    0.011
    """
    return (B + _eta(schedule, 1)) / (_eta(schedule, T) * T)
