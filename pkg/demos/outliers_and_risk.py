"""
Conformal p-values for outlier screening, and risk control
==========================================================

Part one screens 100 test points, 20 of them shifted, using conformal
p-values against 500 clean calibration points and the Benjamini-Hochberg
procedure. Part two calibrates a threshold for a loss other than
miscoverage: the fraction of coordinates of a 5-dimensional response that
fall outside a box.
"""
import numpy as np

from cpkit.risk import bh_procedure, outlier_pvalues, risk_calibrate

rng = np.random.Generator(np.random.Philox(0))

# %%
# Scores are absolute values of standard normals; outliers get a +3 shift.
cal = np.abs(rng.standard_normal(500))
test = np.abs(rng.standard_normal(100))
test[:20] = np.abs(rng.standard_normal(20) + 3)
p = outlier_pvalues(cal, test)
rej = bh_procedure(p, q=0.1)
true_pos = np.count_nonzero(rej.indices < 20)
print(f"rejected {rej.indices.size} points, {true_pos} true outliers, threshold {rej.threshold:.4f}")

# %%
# Risk control: the set is the box [-lam, lam]^5 and the loss is the share of
# coordinates left outside. We pick the smallest lam with risk below 0.1.
Y = rng.standard_normal((200, 5))
lam = risk_calibrate(lambda l: (np.abs(Y) > l).mean(axis=1), 0.1, lam_max=10.0)
Y_new = rng.standard_normal((20000, 5))
print(f"lambda_hat {lam:.3f}; test loss {(np.abs(Y_new) > lam).mean():.4f} (target 0.1)")
