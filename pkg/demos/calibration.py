"""
Recalibrating probability forecasts
===================================

A classifier reports z but the true P(Y = 1 | z) is sigmoid(2 logit z), so
its forecasts are too timid. We compare isotonic regression, histogram
binning and temperature scaling, then look at the Venn-Abers interval for a
single forecast and at the distance-to-calibration bound.
"""
import numpy as np

from cpkit.calibration import binned_ece_estimate, dce_estimate, fit_calibrator, venn_abers
from cpkit.harness.scenarios import binary_logistic

rng = np.random.Generator(np.random.Philox(0))
z_cal, y_cal, _ = binary_logistic(rng, 2000)
z_test, y_test, _ = binary_logistic(rng, 20000)

# %%
print(f"raw forecasts        binned ECE {binned_ece_estimate(z_test, y_test):.4f}")
for kind in ("isotonic", "binning", "temperature"):
    h = fit_calibrator(kind, z_cal, y_cal)
    print(f"{kind:<20} binned ECE {binned_ece_estimate(h(z_test), y_test):.4f}")

# %%
# Temperature scaling should recover slope close to 2.
print("temperature parameters:", fit_calibrator("temperature", z_cal, y_cal).params["beta"])

# %%
# Venn-Abers gives two isotonic fits, one per hypothetical label.
p0, p1 = venn_abers(z_cal, y_cal, 0.7)
print(f"Venn-Abers interval at z=0.7: [{p0:.3f}, {p1:.3f}]")

est, upper = dce_estimate(z_test, y_test, K=20)
print(f"dCE estimate {est:.3f}, 95% upper bound {upper:.3f}")
