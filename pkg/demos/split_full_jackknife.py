"""
Three ways to build a regression interval
=========================================

Split conformal spends half the data on calibration. Full conformal with
least squares reuses every point and is solved in closed form. Jackknife+
refits n leave-one-out models. All three promise 90% coverage with no
assumption beyond exchangeability; here we check that on simulated data
and compare their widths.
"""
import numpy as np

from cpkit.conformal import full_set_least_squares, split_set
from cpkit.crossval import jackknife_interval
from cpkit.harness import trial_rng
from cpkit.scores import FittedScore, fit_predictor

alpha, n, reps = 0.1, 60, 300

# %%
# Each repetition draws fresh data Y = 1 + 2X + noise and one test point.
hits = {"split": 0, "full-ls": 0, "jackknife+": 0}
widths = {k: [] for k in hits}
for r in range(reps):
    rng = trial_rng(0, r)
    X = rng.uniform(-2, 2, size=(n + 1, 1))
    y = 1 + 2 * X[:, 0] + rng.standard_normal(n + 1)
    X_tr, y_tr, x, y_new = X[:n], y[:n], X[n:], y[n]

    # split conformal: fit on the first half, calibrate on the second
    model = fit_predictor("least_squares", X_tr[: n // 2], y_tr[: n // 2])
    sets = {
        "split": split_set(FittedScore("residual", model), X_tr[n // 2:], y_tr[n // 2:], x, alpha),
        "full-ls": full_set_least_squares(X_tr, y_tr, x, alpha),
        "jackknife+": jackknife_interval("least_squares", X_tr, y_tr, x, alpha),
    }
    for k, S in sets.items():
        hits[k] += S.contains(y_new)
        widths[k].append(S.measure())

# %%
# Coverage should sit near 0.9, up to Monte Carlo error of about 0.017 at
# 300 repetitions. Split conformal is wider because it
# calibrates on only 30 points, which forces a higher order statistic.
for k in hits:
    print(f"{k:<11} coverage {hits[k] / reps:.3f}   median width {np.median(widths[k]):.3f}")
