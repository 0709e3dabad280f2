"""End-to-end acceptance checks, one test per criterion, all at master seed 0.

Each criterion re-checks the numeric thresholds from the suite estimates
instead of trusting the suite's own verdict, and enforces the runtime
budget. A one-line PASS/FAIL summary per criterion is printed at the end of
the pytest run (see ``conftest.py``) or when this file is run as a script.
"""
import math
import time

import pytest

from cpkit.harness import run_suite

SEED = 0
RESULTS: dict[int, tuple[bool, str]] = {}


def _run(name, **kw):
    t0 = time.perf_counter()
    rep = run_suite(name, seed=SEED, **kw)
    return rep, time.perf_counter() - t0


def _record(num, title, checks, elapsed, limit, info=""):
    ok = all(c for c, _ in checks) and elapsed < limit
    failed = [msg for c, msg in checks if not c]
    if elapsed >= limit:
        failed.append(f"runtime {elapsed:.1f}s >= {limit}s")
    detail = "; ".join(failed) if failed else info
    RESULTS[num] = (ok, f"{title} [{elapsed:.1f}s / {limit}s] {detail}".rstrip())
    assert ok, RESULTS[num][1]


def criterion_1():
    rep, dt = _run("split-coverage")
    cov = rep["estimate"]
    _record(1, "split coverage sandwich", [(0.891 <= cov <= 0.919, f"coverage {cov}")], dt, 10,
            f"coverage {cov:.4f}")


def criterion_2():
    rep, dt = _run("beta-law")
    d = rep["details"]
    mean, var, target, ks = rep["estimate"], d["variance"], 0.09 / 101, d["ks_pvalue"]
    checks = [(abs(mean - 0.9) <= 0.003, f"mean {mean}"),
              (abs(var / target - 1) <= 0.2, f"variance {var} vs {target}"),
              (ks > 0.001, f"KS p {ks}")]
    _record(2, "training-conditional Beta law", checks, dt, 60,
            f"mean {mean:.5f}, var ratio {var / target:.3f}, KS p {ks:.3g}")


def criterion_3():
    rep, dt = _run("smoothed-pvalue")
    z = rep["estimate"]
    _record(3, "smoothed p-value exactness", [(z <= 3, f"max |z| {z}")], dt, 10, f"max |z| {z:.3f}")


def criterion_4():
    rep, dt = _run("ls-full-cp")
    gap = rep["details"]["max_gap_steps"]
    _record(4, "least-squares full CP vs grid", [(rep["estimate"] == 1.0, "instances disagree"),
                                                 (gap <= 1.0, f"gap {gap} steps")], dt, 30,
            f"max gap {gap:.3f} grid steps")


def criterion_5():
    nest, t1 = _run("cc-nesting")
    jk, t2 = _run("jackknife-plus-coverage")
    tour, t3 = _run("tournament")
    checks = [(nest["estimate"] == 1.0, f"nesting fraction {nest['estimate']}"),
              (jk["estimate"] >= 0.8 - 0.012, f"jackknife+ coverage {jk['estimate']}"),
              (tour["estimate"] == 7, f"tournament count {tour['estimate']}")]
    _record(5, "cross-conformal / CV+ / jackknife+", checks, t1 + t2 + t3, 120,
            f"nesting exact, jackknife+ {jk['estimate']:.4f}, count {tour['estimate']}")


def criterion_6():
    rep, dt = _run("weighted-shift")
    w, u = rep["estimate"], rep["details"]["unweighted_coverage"]
    checks = [(w >= 0.9 - 0.012, f"weighted coverage {w}"),
              (u < 0.9 and u < w, f"unweighted coverage {u} does not undercover")]
    _record(6, "weighted CP under covariate shift", checks, dt, 60,
            f"weighted {w:.4f}, unweighted {u:.4f}")


def criterion_7():
    rep, dt = _run("tracker-envelope")
    r = rep["estimate"]
    _record(7, "quantile tracker envelope", [(r <= 1.0, f"worst prefix ratio {r}")], dt, 30,
            f"worst |mean err - alpha| / bound = {r:.4f}")


def criterion_8():
    rep, dt = _run("martingale")
    R = rep["params"]["R"]
    rate, power = rep["estimate"], rep["details"]["changepoint_power"]
    cap = 0.05 + 3 * math.sqrt(0.05 * 0.95 / R)
    _record(8, "martingale false alarms", [(rate <= cap, f"alarm rate {rate} > {cap}")], dt, 120,
            f"alarm rate {rate:.4f} <= {cap:.4f}, changepoint power {power:.3f} (informational)")


def criterion_9():
    rc, t1 = _run("risk-control")
    eq, t2 = _run("risk-split-equivalence")
    checks = [(rc["estimate"] <= 0.1 + 0.01, f"mean loss {rc['estimate']}"),
              (eq["estimate"] == 1.0, "risk calibration differs from split threshold")]
    _record(9, "conformal risk control", checks, t1 + t2, 120,
            f"mean loss {rc['estimate']:.4f}, split equivalence bit-exact on {eq['params']['R']}")


def criterion_10():
    rep, dt = _run("outlier-fdr")
    fdr = rep["estimate"]
    _record(10, "outlier FDR", [(fdr <= 0.11, f"FDR {fdr}")], dt, 120,
            f"FDR {fdr:.4f}, power {rep['details']['power']:.3f}")


def criterion_11():
    rep, dt = _run("online-independence")
    p = rep["estimate"]
    _record(11, "online p-value independence", [(p > 0.001, f"smallest corrected p {p}")], dt, 120,
            f"smallest Bonferroni-corrected p {p:.3f}")


def criterion_12():
    pava, t1 = _run("pava-projection")
    dce, t2 = _run("dce-coverage")
    va, t3 = _run("venn-abers")
    be, t4 = _run("binece-f-eps")
    checks = [(pava["estimate"] == 1.0, "PAVA differs from brute force"),
              (dce["estimate"] >= 0.95, f"dCE bound coverage {dce['estimate']}"),
              (va["estimate"] <= 3.0, f"Venn-Abers max |z| {va['estimate']}"),
              (be["estimate"] >= 0.95, f"binECE within radius {be['estimate']}")]
    _record(12, "calibration", checks, t1 + t2 + t3 + t4, 120,
            f"PAVA exact, dCE coverage {dce['estimate']:.3f}, Venn-Abers |z| {va['estimate']:.2f}, "
            f"binECE within radius {be['details']['within_radius']}")


def criterion_13():
    lp, t1 = _run("local-perm-type1")
    bp, t2 = _run("binned-perm-type1")
    checks = [(lp["estimate"] <= lp["band"][1], f"local type I {lp['estimate']} > {lp['band'][1]}"),
              (bp["estimate"] <= bp["band"][1], f"binned type I {bp['estimate']} > {bp['band'][1]}")]
    _record(13, "conditional independence tests", checks, t1 + t2, 180,
            f"local {lp['estimate']:.4f} <= {lp['band'][1]:.4f}, binned {bp['estimate']:.4f} <= "
            f"{bp['band'][1]:.4f}, power {lp['details']['power']:.3f} / {bp['details']['power']:.3f} "
            "(informational)")


def criterion_14():
    rep, dt = _run("regression-ci")
    miss, d = rep["estimate"], rep["details"]
    bound = 2 * math.sqrt(math.log(20)) * math.sqrt(10 / 2000)
    checks = [(miss <= 0.11, f"non-coverage {miss}"),
              (d["mean_length"] <= bound, f"mean length {d['mean_length']} > {bound}")]
    _record(14, "regression CI", checks, dt, 60,
            f"non-coverage {miss:.4f}, mean length {d['mean_length']:.4f} <= {bound:.4f}")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11, criterion_12,
            criterion_13, criterion_14]


@pytest.mark.acceptance
@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"criterion_{i}" for i in range(1, 15)])
def test_acceptance(criterion):
    criterion()


def summary_lines():
    return [f"{'PASS' if ok else 'FAIL'}  criterion {num:>2}: {msg}" for num, (ok, msg) in sorted(RESULTS.items())]


if __name__ == "__main__":
    for c in CRITERIA:
        try:
            c()
        except AssertionError:
            pass
    print("\n".join(summary_lines()))
