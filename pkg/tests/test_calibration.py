import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cpkit.calibration import (
    binned_ece_estimate, binned_ece_radius, binned_ece_slack, dce_estimate, ece_discrete,
    fit_calibrator, isotonic_fit, unit_bins, venn_abers,
)
from cpkit.harness.suites import brute_force_isotonic


def _f_eps(x, eps):
    return (1 - eps) / 2 + eps * x


def _y_step(x):
    return ((x > 0.25) & (x < 0.75)).astype(float)


def test_isotonic_example():
    np.testing.assert_allclose(isotonic_fit([0.1, 0.2, 0.3], [1, 0, 1]), [0.5, 0.5, 1.0])


def test_isotonic_ties_pooled_and_input_order():
    # the tied block at 0.3 has mean 1/2 < 1, so everything pools
    np.testing.assert_allclose(isotonic_fit([0.3, 0.1, 0.3], [0, 1, 1]), [2 / 3, 2 / 3, 2 / 3])


@given(st.lists(st.tuples(st.integers(0, 4), st.integers(-3, 3)), min_size=1, max_size=9))
def test_isotonic_matches_brute_force(pairs):
    z = np.array([p[0] for p in pairs], dtype=float)
    y = np.array([p[1] for p in pairs], dtype=float)
    fit = isotonic_fit(z, y)
    np.testing.assert_allclose(fit, brute_force_isotonic(z, y), atol=1e-12)
    order = np.argsort(z, kind="stable")
    assert np.all(np.diff(fit[order]) >= -1e-12)


def test_binning_one_bin_gives_mean(rng):
    z = rng.uniform(size=50)
    y = (rng.uniform(size=50) < 0.3).astype(float)
    h = fit_calibrator("binning", z, y, K=1)
    np.testing.assert_allclose(h(np.linspace(0, 1, 7)), y.mean())


def test_binning_empty_bin_is_half_and_training_calibrated(rng):
    z = rng.uniform(0, 0.5, size=200)
    y = (rng.uniform(size=200) < z).astype(float)
    h = fit_calibrator("binning", z, y, K=4)
    assert h([0.9])[0] == 0.5
    hz = h(z)
    b = unit_bins(z, 4)
    for k in np.unique(b):
        assert abs((y[b == k] - hz[b == k]).sum()) < 1e-9


def test_isotonic_calibrator_is_monotone(rng):
    z = rng.uniform(size=300)
    y = (rng.uniform(size=300) < z ** 2).astype(float)
    h = fit_calibrator("isotonic", z, y)
    g = h(np.linspace(0, 1, 501))
    assert np.all(np.diff(g) >= 0)
    np.testing.assert_allclose(h(z), isotonic_fit(z, y))


def test_temperature_near_identity(rng):
    z = rng.uniform(0.02, 0.98, size=20000)
    y = (rng.uniform(size=z.size) < z).astype(float)
    h = fit_calibrator("temperature", z, y)
    b0, b1 = h.params["beta"]
    assert h.flag is None
    assert abs(b0) < 0.1 and abs(b1 - 1) < 0.1


def test_temperature_separable_labels_clamped():
    h = fit_calibrator("temperature", [0.2, 0.4, 0.6], [1, 1, 1])
    assert h.flag == "clamped"
    assert max(abs(b) for b in h.params["beta"]) <= 50
    assert np.all(h([0.01, 0.99]) > 0.999)
    assert np.all(fit_calibrator("temperature", [0.2, 0.9], [0, 0])([0.5]) < 1e-3)


def test_labels_must_be_binary():
    with pytest.raises(ValueError):
        fit_calibrator("binning", [0.1], [2])


def test_binece_perfect_agreement_is_zero():
    y = np.array([0, 1, 1, 0, 1], dtype=float)
    assert binned_ece_estimate(y, y, K=5) == 0.0


def test_binece_f_eps_two_bins(rng):
    eps, n = 0.2, 100000
    x = rng.uniform(size=n)
    est = binned_ece_estimate(_f_eps(x, eps), _y_step(x), K=2)
    assert abs(est - eps / 4) <= binned_ece_radius(n, 0.01) + binned_ece_slack(n, 2)


def test_ece_discrete_examples():
    y = np.array([1, 0, 0, 1, 1, 0, 1, 0, 1, 1, 0, 1], dtype=float)
    assert ece_discrete(np.full(y.size, y.mean()), y) == pytest.approx(0.0, abs=1e-15)
    z = np.array([0.25] * 4 + [0.75] * 4)
    yy = np.array([1, 0, 0, 0, 1, 1, 1, 0], dtype=float)
    assert ece_discrete(z, yy) == 0.0


def test_ece_discrete_refuses_continuous(rng):
    x = rng.uniform(size=1000)
    with pytest.raises(ValueError, match="dce_estimate"):
        ece_discrete(_f_eps(x, 0.1), _y_step(x))


def test_dce_upper_bound_covers_constant_forecast(rng):
    # for a constant forecast c with P(Y = 1) = mu, the distance to calibration is |c - mu|
    c, mu, n, K = 0.3, 0.2, 2000, 10
    hits = 0
    for _ in range(200):
        y = (rng.uniform(size=n) < mu).astype(float)
        hits += dce_estimate(np.full(n, c), y, K, delta=0.05)[1] >= abs(c - mu)
    assert hits / 200 >= 0.95


def test_dce_estimate_resolves_f_eps_jump(rng):
    # the estimator is only an upper bound: with fine bins it sees the jump in E[Y | X]
    x = rng.uniform(size=20000)
    est, _ = dce_estimate(_f_eps(x, 0.2), _y_step(x), 20)
    assert est > 0.2 / 4


def test_dce_calibrated_expectation(rng):
    n = 2000
    K = math.ceil(n ** (1 / 3))
    vals = []
    for _ in range(200):
        z = rng.uniform(size=n)
        y = (rng.uniform(size=n) < z).astype(float)
        vals.append(dce_estimate(z, y, K)[0])
    assert np.mean(vals) <= 1 / K + math.sqrt(K / n)


def test_dce_at_most_ece_on_discrete(rng):
    for _ in range(50):
        v = np.sort(rng.uniform(size=3))
        z = rng.choice(v, size=600)
        y = (rng.uniform(size=600) < rng.uniform(size=1)).astype(float)
        # dCE <= ECE holds for the population; allow the estimator's 1/K discretisation
        K = 50
        assert dce_estimate(z, y, K)[0] <= ece_discrete(z, y) + 1 / K + 1e-12


def test_venn_abers_edges():
    assert venn_abers([], [], 0.3) == (0.0, 1.0)
    p0, p1 = venn_abers([0.1, 0.2, 0.3], [1, 1, 1], 0.9)
    assert p1 == 1.0 and p0 == pytest.approx(0.75)


def test_venn_abers_ordering(rng):
    z = rng.uniform(size=40)
    y = (rng.uniform(size=40) < z).astype(float)
    for t in np.linspace(0, 1, 11):
        p0, p1 = venn_abers(z, y, t)
        assert 0 <= p0 <= p1 <= 1
