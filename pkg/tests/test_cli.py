import json
import math
from pathlib import Path

import numpy as np
import pytest

from cpkit.cli import _dumps, main, read_csv, UsageError
from cpkit.crossval import jackknife_interval
from cpkit.online import MartingaleState, martingale_update
from cpkit.sets import PredictionSet

FIX = Path(__file__).parent / "fixtures"


def run(argv, tmp_path, name="out.jsonl"):
    out = tmp_path / name
    code = main([*argv, "-o", str(out)])
    text = out.read_text() if out.exists() else ""
    return code, text


def records(text):
    return [json.loads(line) for line in text.splitlines() if line.strip()]


@pytest.mark.parametrize("alpha", ["0.2", "0.5"])
def test_split_golden(alpha, tmp_path):
    code, text = run(["predict", "--train", str(FIX / "split4_calib.csv"), "--pretrain",
                      str(FIX / "split4_pretrain.csv"), "--test", str(FIX / "split4_test.csv"),
                      "--alpha", alpha], tmp_path)
    assert code == 0
    assert text == (FIX / f"split4_alpha{alpha}.jsonl").read_text()


@pytest.mark.parametrize("method", ["split", "jackknife-plus", "cv-plus", "cross-conformal", "full-ls"])
def test_predict_nesting_in_alpha(method, tmp_path):
    base = ["predict", "--train", str(FIX / "linear_train.csv"), "--test", str(FIX / "linear_test.csv"),
            "--method", method, "--seed", "0"]
    _, wide = run([*base, "--alpha", "0.1"], tmp_path, "a.jsonl")
    _, narrow = run([*base, "--alpha", "0.5"], tmp_path, "b.jsonl")
    for a, b in zip(records(wide), records(narrow)):
        assert PredictionSet.from_dict(b["set"]).issubset(PredictionSet.from_dict(a["set"]))


def test_jackknife_plus_matches_library_bytes(tmp_path):
    train = read_csv(FIX / "linear_train.csv")
    test = read_csv(FIX / "linear_test.csv")
    expected = ""
    for i in range(test["n"]):
        S = jackknife_interval("least_squares", train["X"], train["y"], test["X"][i:i + 1], 0.1, "plus")
        rec = {"row": i, "set": S.to_dict(), "covered": S.contains(float(test["y"][i]))}
        expected += _dumps(rec) + "\n"
    code, text = run(["predict", "--train", str(FIX / "linear_train.csv"), "--test",
                      str(FIX / "linear_test.csv"), "--method", "jackknife-plus"], tmp_path)
    assert code == 0 and text == expected


def test_mondrian_needs_group(tmp_path):
    code, _ = run(["predict", "--train", str(FIX / "linear_train.csv"), "--test",
                   str(FIX / "linear_test.csv"), "--method", "mondrian", "--seed", "0"], tmp_path)
    assert code == 2


def test_split_without_pretrain_needs_seed(tmp_path, capsys):
    code, _ = run(["predict", "--train", str(FIX / "linear_train.csv"), "--test",
                   str(FIX / "linear_test.csv")], tmp_path)
    assert code == 2 and "seed" in capsys.readouterr().err


def test_malformed_csv_diagnostics(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("x0,y\n1,2\n3,abc\n")
    code, _ = run(["predict", "--train", str(bad), "--test", str(bad), "--seed", "0"], tmp_path)
    err = capsys.readouterr().err
    assert code == 2 and "row 3" in err and "'y'" in err
    bad.write_text("x0,y\n1,2,3\n")
    with pytest.raises(UsageError, match="row 2 has 3 fields"):
        read_csv(bad)


def test_config_roundtrip_and_unknown_keys(tmp_path):
    cfg = tmp_path / "cfg.json"
    base = ["predict", "--train", str(FIX / "linear_train.csv"), "--test", str(FIX / "linear_test.csv"),
            "--method", "cv-plus", "--folds", "3", "--seed", "4", "--alpha", "0.2"]
    code, first = run([*base, "--emit-config", str(cfg)], tmp_path, "a.jsonl")
    assert code == 0
    emitted = json.loads(cfg.read_text())
    assert emitted["folds"] == 3 and emitted["method"] == "cv-plus"
    code, second = run(["predict", "--config", str(cfg)], tmp_path, "b.jsonl")
    assert code == 0 and first == second
    # flags override the file
    _, third = run(["predict", "--config", str(cfg), "--alpha", "0.5"], tmp_path, "c.jsonl")
    assert third != first
    cfg.write_text(json.dumps({**emitted, "bogus": 1}))
    code, _ = run(["predict", "--config", str(cfg)], tmp_path, "d.jsonl")
    assert code == 2


def test_outliers_score_column(tmp_path):
    cal = tmp_path / "cal.csv"
    test = tmp_path / "test.csv"
    cal.write_text("s\n" + "\n".join(str(v) for v in np.arange(1, 20) / 20) + "\n")
    test.write_text("s\n5\n0.5\n")
    code, text = run(["outliers", "--calib", str(cal), "--test", str(test), "--score-column", "s",
                      "--q", "0.2"], tmp_path)
    recs = records(text)
    assert code == 0
    assert recs[0]["pvalue"] == pytest.approx(1 / 20) and recs[0]["rejected"]
    assert recs[1]["pvalue"] == pytest.approx(11 / 20) and not recs[1]["rejected"]


def _events(path, ys):
    path.write_text("".join(json.dumps({"t": i + 1, "x": [], "y": float(v)}) + "\n" for i, v in enumerate(ys)))


def test_monitor_empty_stream(tmp_path):
    ev = tmp_path / "ev.jsonl"
    ev.write_text("")
    code, text = run(["monitor", "--events", str(ev)], tmp_path)
    assert code == 0 and text == ""


def test_monitor_snapshot_resume_equals_full_run(tmp_path):
    ys = np.random.Generator(np.random.Philox(0)).uniform(size=60)
    full, head, tail = tmp_path / "full.jsonl", tmp_path / "head.jsonl", tmp_path / "tail.jsonl"
    _events(full, ys)
    head.write_text("".join(full.read_text().splitlines(True)[:25]))
    tail.write_text("".join(full.read_text().splitlines(True)[25:]))
    snap = tmp_path / "snap.json"
    _, ref = run(["monitor", "--events", str(full)], tmp_path, "ref.jsonl")
    _, a = run(["monitor", "--events", str(head), "--snapshot", str(snap)], tmp_path, "a.jsonl")
    _, b = run(["monitor", "--events", str(tail), "--resume", str(snap)], tmp_path, "b.jsonl")
    assert a + b == ref


def test_monitor_alarm_iff_wealth_threshold(tmp_path):
    # a rising stream gives p = 1/t, which drives the wealth up
    ys = np.linspace(0.01, 0.99, 80)
    ev = tmp_path / "ev.jsonl"
    _events(ev, ys)
    _, text = run(["monitor", "--events", str(ev), "--lam", "0.9"], tmp_path)
    recs = records(text)
    st = MartingaleState(alpha=0.05, lam=0.9)
    fired = False
    for r in recs:
        st = martingale_update(st, r["p"])
        assert r["log_m"] == pytest.approx(st.log_wealth, abs=1e-12)
        assert r["alarm"] == (r["log_m"] >= math.log(20))
        fired |= r["alarm"]
    assert fired


def test_monitor_out_of_order(tmp_path, capsys):
    ev = tmp_path / "ev.jsonl"
    ev.write_text('{"t": 1, "y": 0.1}\n{"t": 3, "y": 0.2}\n')
    code, _ = run(["monitor", "--events", str(ev)], tmp_path)
    assert code == 2 and "out of order" in capsys.readouterr().err


def test_calibrate_probs_isotonic(tmp_path):
    cal = tmp_path / "cal.csv"
    cal.write_text("score,label\n0.1,1\n0.2,0\n0.3,1\n")
    code, text = run(["calibrate-probs", "--calib", str(cal), "--metrics", "--bins", "2"], tmp_path)
    recs = records(text)
    assert code == 0
    assert [r["calibrated"] for r in recs[:3]] == [0.5, 0.5, 1.0]
    assert set(recs[3]["metrics"]) == {"binned_ece", "dce_estimate", "dce_upper", "n"}


def test_test_ci_exhaustive(tmp_path):
    data = tmp_path / "d.csv"
    data.write_text("x0,y\n0,0\n1,1\n3,3\n")
    code, text = run(["test-ci", "--data", str(data), "--budget", "exhaustive", "--alpha", "0.2"], tmp_path)
    rec = records(text)[0]
    assert code == 0 and rec["pvalue"] == pytest.approx(1 / 6) and rec["reject"]


def test_verify_and_report(tmp_path, capsys):
    out = tmp_path / "v.json"
    code = main(["verify", "--suite", "tournament", "--suite", "risk-split-equivalence", "--R", "20",
                 "--seed", "0", "-o", str(out)])
    doc = json.loads(out.read_text())
    assert code == 0 and doc["pass"]
    assert [s["suite"] for s in doc["suites"]] == ["tournament", "risk-split-equivalence"]
    assert main(["report", "--input", str(out)]) == 0
    assert "overall: PASS" in capsys.readouterr().out


def test_verify_unknown_suite_and_missing_seed(tmp_path):
    assert main(["verify", "--suite", "nope", "--seed", "0"]) == 2
    assert main(["verify", "--suite", "tournament"]) == 2


def test_verify_seed_changes_values_not_verdict(tmp_path):
    docs = []
    for seed in ("0", "1"):
        out = tmp_path / f"v{seed}.json"
        main(["verify", "--suite", "split-coverage", "--R", "2000", "--seed", seed, "-o", str(out)])
        docs.append(json.loads(out.read_text()))
    assert docs[0]["suites"][0]["estimate"] != docs[1]["suites"][0]["estimate"]
    assert docs[0]["pass"] == docs[1]["pass"]
