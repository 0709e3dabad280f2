"""
Watching a stream: quantile tracking and a test martingale
==========================================================

The quantile tracker adjusts its threshold after every observation and
keeps the long-run error rate close to alpha on any bounded stream, even an
adversarial one. The conformal test martingale bets against
exchangeability and raises an alarm when its wealth reaches 1/alpha.
"""
import math

import numpy as np

from cpkit.online import log_wealth_path, online_pvalues, run_tracker, tracker_longrun_bound

rng = np.random.Generator(np.random.Philox(0))
T = 2000

# %%
# Scores drift upward halfway through the stream.
scores = np.concatenate([rng.uniform(0, 0.5, T // 2), rng.uniform(0.3, 1.0, T // 2)])

err, q = run_tracker(scores, alpha=0.1, B=1.0, schedule=0.05)
for t in (100, 1000, 1500, T):
    print(f"t={t:>5}  error rate {err[:t].mean():.3f}  threshold {q[t - 1]:.3f}  "
          f"guaranteed within {tracker_longrun_bound(1.0, 0.05, t):.3f} of 0.1")

# %%
# Online conformal p-values are uniform while the stream is exchangeable.
# After the shift new scores rank high, p-values shrink, and wealth grows.
p = online_pvalues(scores, xi=rng.uniform(size=T))
logM = log_wealth_path(p, lam=0.5)
alarm = np.flatnonzero(logM >= math.log(20))
print(f"max log-wealth before the change: {logM[: T // 2].max():.2f} (alarm level {math.log(20):.2f})")
print("first alarm at t =", int(alarm[0]) + 1 if alarm.size else None)
