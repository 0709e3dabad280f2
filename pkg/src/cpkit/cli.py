"""Command-line interface.

Subcommands: ``predict``, ``outliers``, ``monitor``, ``calibrate-probs``,
``test-ci``, ``verify`` and ``report``. Every option can also come from a JSON
file given with ``--config`` (keys are the option names with underscores);
flags on the command line override the file, and ``--emit-config PATH``
writes the effective configuration so that a run can be repeated exactly.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import binned_ece_estimate, dce_estimate, fit_calibrator, venn_abers
from .conditional import GroupFn, mondrian_set
from .conformal import conformal_pvalue, full_set_least_squares, split_set, split_threshold
from .crossval import cross_conformal_set, cv_plus_interval, jackknife_interval, make_folds
from .independence import (
    binned_local_permutation_test, local_permutation_test, marginal_independence_test, regression_ci,
)
from .online import MartingaleState, StreamState, TrackerState, martingale_update, tracker_step
from .risk import bh_procedure, outlier_pvalues
from .scores import FittedScore, Score, fit_predictor
from .weighted import gaussian_kernel


class UsageError(Exception):
    """Bad input data or configuration; reported without a traceback."""


# ---------------------------------------------------------------------------
# CSV and JSON helpers


def read_csv(path, require_y: bool = True) -> dict:
    """Read a data CSV with columns ``x0..x{d-1}``, ``y`` and optional ``w``, ``group``.

    Returns a dict with ``X (n, d)``, ``y``, ``w`` and ``group`` (the last
    three may be ``None``) plus any other numeric column under its name.
    """
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as e:
        raise UsageError(f"{path}: cannot open ({e.strerror})") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise UsageError(f"{path}: empty file, expected a header row") from None
        if len(set(header)) != len(header):
            raise UsageError(f"{path}: duplicate column names in header")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise UsageError(f"{path}: row {lineno} has {len(row)} fields, header has {len(header)}")
            vals = []
            for col, cell in zip(header, row):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise UsageError(f"{path}: row {lineno}, column {col!r}: not a number: {cell!r}") from None
            rows.append(vals)
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    cols = {h: data[:, j] for j, h in enumerate(header)}
    xs = sorted((h for h in header if h.startswith("x") and h[1:].isdigit()), key=lambda h: int(h[1:]))
    if [int(h[1:]) for h in xs] != list(range(len(xs))):
        raise UsageError(f"{path}: feature columns must be x0..x{{d-1}} without gaps")
    if require_y and "y" not in cols:
        raise UsageError(f"{path}: missing response column 'y'")
    out = {"X": np.column_stack([cols[h] for h in xs]) if xs else np.zeros((len(rows), 0)),
           "y": cols.get("y"), "w": cols.get("w"), "group": cols.get("group"), "n": len(rows)}
    out.update({h: cols[h] for h in header if h not in xs and h not in ("y", "w", "group")})
    return out


def _num(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return None
        return v
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _dumps(obj) -> str:
    def conv(o):
        if isinstance(o, dict):
            return {k: conv(v) for k, v in o.items()}
        if isinstance(o, (list, tuple, np.ndarray)):
            return [conv(v) for v in o]
        return _num(o)
    return json.dumps(conv(obj), separators=(",", ":"), allow_nan=False)


class _Writer:
    def __init__(self, path):
        self.fh = sys.stdout if path in (None, "-") else open(path, "w", encoding="utf-8")

    def write(self, rec):
        self.fh.write(_dumps(rec) + "\n")

    def close(self):
        if self.fh is not sys.stdout:
            self.fh.close()
        else:
            self.fh.flush()


# ---------------------------------------------------------------------------
# configuration


_META = {"command", "config", "emit_config", "func"}


def _effective(args, parser, defaults: dict) -> dict:
    given = {k: v for k, v in vars(args).items() if k not in _META}
    cfg = {}
    if getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read config {args.config}: {e}") from None
        if not isinstance(cfg, dict):
            raise UsageError("config must be a JSON object")
        unknown = sorted(set(cfg) - set(defaults))
        if unknown:
            raise UsageError(f"unknown config keys for {args.command}: {', '.join(unknown)}")
    eff = {**defaults, **cfg, **given}
    if getattr(args, "emit_config", None):
        Path(args.emit_config).write_text(json.dumps(eff, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return eff


def _need_seed(cfg, what):
    if cfg.get("seed") is None:
        raise UsageError(f"{what} is randomized; pass --seed")
    return int(cfg["seed"])


def _need(cfg, key, what):
    if cfg.get(key) is None:
        raise UsageError(f"{what} needs --{key.replace('_', '-')}")
    return cfg[key]


# ---------------------------------------------------------------------------
# predict


class _DropLast:
    """Predictor view that ignores the trailing group column."""

    def __init__(self, model):
        self.model = model

    def predict(self, X):
        return self.model.predict(np.asarray(X, dtype=float)[:, :-1])


def _group_of(x):
    return float(x[-1])


def _pretrained_residual(cfg, train, d):
    params = cfg["predictor_params"] or {}
    if cfg.get("pretrain"):
        pre = read_csv(cfg["pretrain"])
        if pre["X"].shape[1] != d:
            raise UsageError("pretrain and train CSVs have different feature columns")
        return FittedScore("residual", fit_predictor(cfg["predictor"], pre["X"], pre["y"], **params)), train
    seed = _need_seed(cfg, "split without --pretrain (random half split)")
    n = train["n"]
    perm = np.random.Generator(np.random.Philox(seed)).permutation(n)
    fit_idx, cal_idx = np.sort(perm[: n // 2]), np.sort(perm[n // 2:])
    model = fit_predictor(cfg["predictor"], train["X"][fit_idx], train["y"][fit_idx], **params)
    cal = {**train, "X": train["X"][cal_idx], "y": train["y"][cal_idx], "n": cal_idx.size,
           "group": None if train["group"] is None else train["group"][cal_idx]}
    return FittedScore("residual", model), cal


def _algorithm(cfg):
    params = cfg["predictor_params"] or {}
    if not params:
        return cfg["predictor"]
    return lambda A, b: fit_predictor(cfg["predictor"], A, b, **params)


def cmd_predict(cfg) -> int:
    train = read_csv(_need(cfg, "train", "predict"))
    test = read_csv(_need(cfg, "test", "predict"), require_y=False)
    d = train["X"].shape[1]
    if test["X"].shape[1] != d:
        raise UsageError(f"test has {test['X'].shape[1]} feature columns, train has {d}")
    alpha = float(cfg["alpha"])
    method = cfg["method"]
    params = cfg["predictor_params"] or {}
    out = _Writer(cfg["output"])
    X, y = train["X"], train["y"]

    if method in ("split", "mondrian"):
        score, cal = _pretrained_residual(cfg, train, d)
    if method == "split":
        cal_scores = score(cal["X"], cal["y"])
        q = split_threshold(cal_scores, alpha)
    elif method in ("cv-plus", "cross-conformal"):
        folds = make_folds(train["n"], int(cfg["folds"]), seed=_need_seed(cfg, method))
    elif method == "mondrian":
        if cal["group"] is None or test["group"] is None:
            raise UsageError("mondrian needs a 'group' column in the train and test CSVs")
        mscore = FittedScore("residual", _DropLast(score.model))
        Xg = np.column_stack([cal["X"], cal["group"]])
        g = GroupFn.features(_group_of)
    elif method not in ("full-ls", "jackknife-plus"):
        raise UsageError(f"unknown method {method!r}")

    for i in range(test["n"]):
        x = test["X"][i:i + 1]
        rec = {"row": i}
        if method == "split":
            S = split_set(score, cal["X"], cal["y"], x, alpha)
            rec["threshold"] = q
        elif method == "full-ls":
            S = full_set_least_squares(X, y, x, alpha, fit_intercept=bool(cfg["fit_intercept"]))
        elif method == "jackknife-plus":
            S = jackknife_interval(_algorithm(cfg), X, y, x, alpha, "plus")
        elif method == "cv-plus":
            S = cv_plus_interval(_algorithm(cfg), X, y, x, alpha, folds)
        elif method == "cross-conformal":
            S = cross_conformal_set(Score("residual", cfg["predictor"], params), X, y, x, alpha, folds)
        else:
            xg = np.column_stack([x, test["group"][i:i + 1]])
            S = mondrian_set(mscore, Xg, cal["y"], xg, alpha, g)
            rec["group"] = float(test["group"][i])
        rec["set"] = S.to_dict()
        if test["y"] is not None:
            rec["covered"] = S.contains(float(test["y"][i]))
            if method == "split":
                s_test = score(x, test["y"][i:i + 1])[0]
                rec["pvalue"] = conformal_pvalue(np.append(cal_scores, s_test))
        out.write(rec)
    out.close()
    return 0


# ---------------------------------------------------------------------------
# outliers


def cmd_outliers(cfg) -> int:
    cal = read_csv(_need(cfg, "calib", "outliers"), require_y=False)
    test = read_csv(_need(cfg, "test", "outliers"), require_y=False)
    col = cfg["score_column"]
    if col:
        if col not in cal or col not in test:
            raise UsageError(f"score column {col!r} missing from an input CSV")
        s_cal, s_test = cal[col], test[col]
    else:
        pre = read_csv(_need(cfg, "pretrain", "outliers without --score-column"))
        model = fit_predictor(cfg["predictor"], pre["X"], pre["y"], **(cfg["predictor_params"] or {}))
        score = FittedScore("residual", model)
        if cal["y"] is None or test["y"] is None:
            raise UsageError("residual outlier scores need a 'y' column")
        s_cal, s_test = score(cal["X"], cal["y"]), score(test["X"], test["y"])
    p = outlier_pvalues(s_cal, s_test)
    rej = bh_procedure(p, float(cfg["q"]))
    flagged = np.zeros(p.size, dtype=bool)
    flagged[rej.indices] = True
    out = _Writer(cfg["output"])
    for i in range(p.size):
        out.write({"row": i, "score": float(s_test[i]), "pvalue": float(p[i]), "rejected": bool(flagged[i]),
                   "bh_threshold": rej.threshold})
    out.close()
    return 0


# ---------------------------------------------------------------------------
# monitor


class Monitor:
    """Online p-values, a test martingale and a quantile tracker over one stream."""

    def __init__(self, cfg, score):
        self.cfg = cfg
        self.stream = StreamState(score)
        self.mart = MartingaleState(alpha=float(cfg["alarm_alpha"]), lam=float(cfg["lam"]))
        self.tracker = TrackerState(alpha=float(cfg["alpha"]), B=float(cfg["B"]), schedule=float(cfg["eta"]),
                                    q=float(cfg["q1"]))

    def step(self, event, lineno):
        if not isinstance(event, dict) or "y" not in event:
            raise UsageError(f"event {lineno}: expected an object with 'y' (and 'x')")
        expect = self.stream.t + 1
        if "t" in event and int(event["t"]) != expect:
            raise UsageError(f"event {lineno}: out of order, got t={event['t']}, expected t={expect}")
        try:
            x = np.asarray(event.get("x", []), dtype=float).ravel()
            y = float(event["y"])
        except (TypeError, ValueError):
            raise UsageError(f"event {lineno}: malformed 'x' or 'y'") from None
        score = float(self.stream.score(x[None, :], [y])[0])
        q = self.tracker.q
        try:
            covered, self.tracker = tracker_step(self.tracker, score)
        except ValueError as e:
            raise UsageError(f"event {lineno}: {e}; raise --B") from None
        p = self.stream.step(x, y)
        self.mart = martingale_update(self.mart, p)
        return {"t": self.stream.t, "score": score, "p": p, "err": not covered, "q": q,
                "log_m": self.mart.log_wealth, "alarm": self.mart.alarm}

    def snapshot(self) -> dict:
        return {"stream": self.stream.snapshot(),
                "martingale": {"log_wealth": _num(self.mart.log_wealth), "t": self.mart.t,
                               "alarm": self.mart.alarm, "ever_alarmed": self.mart.ever_alarmed},
                "tracker": {"q": self.tracker.q, "t": self.tracker.t, "n_err": self.tracker.n_err}}

    def restore(self, snap):
        self.stream = StreamState.restore(self.stream.score, snap["stream"])
        m = snap["martingale"]
        self.mart = MartingaleState(alpha=self.mart.alpha, lam=self.mart.lam, log_wealth=float(m["log_wealth"]), t=int(m["t"]),
                                    alarm=bool(m["alarm"]), ever_alarmed=bool(m["ever_alarmed"]))
        tr = snap["tracker"]
        self.tracker = TrackerState(alpha=self.tracker.alpha, B=self.tracker.B, schedule=self.tracker.schedule,
                                    q=float(tr["q"]), t=int(tr["t"]), n_err=int(tr["n_err"]))


def cmd_monitor(cfg) -> int:
    if cfg["score"] == "residual":
        pre = read_csv(_need(cfg, "pretrain", "residual monitoring"))
        model = fit_predictor(cfg["predictor"], pre["X"], pre["y"], **(cfg["predictor_params"] or {}))
        score = FittedScore("residual", model)
    elif cfg["score"] == "identity":
        score = FittedScore.from_callable(lambda X, y: y)
    else:
        raise UsageError(f"unknown monitor score {cfg['score']!r}")
    mon = Monitor(cfg, score)
    if cfg["resume"]:
        try:
            mon.restore(json.loads(Path(cfg["resume"]).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError, KeyError) as e:
            raise UsageError(f"cannot resume from {cfg['resume']}: {e}") from None
    src = sys.stdin if cfg["events"] in (None, "-") else open(cfg["events"], encoding="utf-8")
    out = _Writer(cfg["output"])
    try:
        for lineno, line in enumerate(src, start=1):
            if not line.strip():
                continue
            try:
                ev = json.loads(line)
            except json.JSONDecodeError:
                raise UsageError(f"event {lineno}: not valid JSON") from None
            rec = mon.step(ev, lineno)
            out.write({**ev, **rec})
    finally:
        out.close()
        if src is not sys.stdin:
            src.close()
    if cfg["snapshot"]:
        Path(cfg["snapshot"]).write_text(_dumps(mon.snapshot()) + "\n", encoding="utf-8")
    return 0


# ---------------------------------------------------------------------------
# calibrate-probs


def _read_probs(path, need_label=True):
    d = read_csv(path, require_y=False)
    if "score" not in d:
        raise UsageError(f"{path}: missing 'score' column")
    if need_label and "label" not in d:
        raise UsageError(f"{path}: missing 'label' column")
    z = d["score"]
    if np.any((z < 0) | (z > 1)):
        raise UsageError(f"{path}: scores must lie in [0, 1]")
    return z, d.get("label")


def cmd_calibrate_probs(cfg) -> int:
    z, y = _read_probs(_need(cfg, "calib", "calibrate-probs"))
    test_z = _read_probs(cfg["test"], need_label=False)[0] if cfg["test"] else z
    out = _Writer(cfg["output"])
    kind = cfg["method"]
    try:
        if kind == "venn-abers":
            for i, t in enumerate(test_z):
                p0, p1 = venn_abers(z, y, float(t))
                out.write({"row": i, "score": float(t), "p0": p0, "p1": p1})
        else:
            cal = fit_calibrator(kind, z, y, K=int(cfg["bins"]))
            h = cal(test_z)
            for i, t in enumerate(test_z):
                out.write({"row": i, "score": float(t), "calibrated": float(h[i])})
        if cfg["metrics"]:
            est, upper = dce_estimate(z, y, int(cfg["bins"]), float(cfg["delta"]))
            out.write({"metrics": {"binned_ece": binned_ece_estimate(z, y, int(cfg["bins"])),
                                   "dce_estimate": est, "dce_upper": upper, "n": int(z.size)}})
    except ValueError as e:
        raise UsageError(str(e)) from None
    finally:
        out.close()
    return 0


# ---------------------------------------------------------------------------
# test-ci


def _budget(cfg):
    b = cfg["budget"]
    return "exhaustive" if str(b) == "exhaustive" else int(b)


def cmd_test_ci(cfg) -> int:
    data = read_csv(_need(cfg, "data", "test-ci"))
    kind = cfg["test"]
    out = _Writer(cfg["output"])
    alpha = float(cfg["alpha"])
    try:
        if kind in ("marginal", "local", "binned"):
            if data["X"].shape[1] < 1:
                raise UsageError("permutation tests need an x0 column")
            x, y = data["X"][:, 0], data["y"]
            budget = _budget(cfg)
            seed = None if budget == "exhaustive" else _need_seed(cfg, "a sampled permutation test")
            rec = {"test": kind}
            if kind == "marginal":
                p, rej = marginal_independence_test(x, y, cfg["statistic"], budget, alpha, seed)
            else:
                if data["w"] is None:
                    raise UsageError(f"the {kind} test needs a 'w' column")
                if kind == "local":
                    p, rej = local_permutation_test(x, y, data["w"], cfg["statistic"], budget, alpha, seed)
                else:
                    w = data["w"]
                    edges = (np.asarray(cfg["edges"], dtype=float) if cfg["edges"]
                             else np.linspace(w.min(), w.max(), int(cfg["bins"]) + 1))
                    p, rej, infl = binned_local_permutation_test(x, y, w, edges, cfg["statistic"], budget,
                                                                 alpha, seed, L=cfg["lipschitz"])
                    rec["inflation"] = infl
            rec.update({"pvalue": p, "reject": rej})
            out.write(rec)
        elif kind == "regression-ci":
            query = read_csv(_need(cfg, "query", "regression-ci"), require_y=False)
            method = cfg["ci_method"]
            kw = {"a": float(cfg["a"]), "b": float(cfg["b"])}
            if method == "binned":
                kw["edges"] = np.asarray(_need(cfg, "edges", "binned regression-ci"), dtype=float)
            elif method == "blurred":
                kw.update(kernel=gaussian_kernel(float(cfg["bandwidth"])), B=1.0,
                          seed=_need_seed(cfg, "blurred regression-ci"))
            ci = regression_ci(data["X"], data["y"], query["X"], alpha, method, **kw)
            for j in range(query["n"]):
                out.write({"row": j, "lo": ci.lo[j], "hi": ci.hi[j], "n_local": ci.n_local[j]})
        else:
            raise UsageError(f"unknown test {kind!r}")
    except ValueError as e:
        raise UsageError(str(e)) from None
    finally:
        out.close()
    return 0


# ---------------------------------------------------------------------------
# verify and report


def cmd_verify(cfg) -> int:
    from .harness import SUITES, run_suite

    names = cfg["suite"] or list(SUITES)
    unknown = [s for s in names if s not in SUITES]
    if unknown:
        raise UsageError(f"unknown suite(s): {', '.join(unknown)}; known: {', '.join(SUITES)}")
    seed = _need_seed(cfg, "verify")
    reports, timing = [], {}
    for name in names:
        t0 = time.perf_counter()
        reports.append(run_suite(name, R=cfg["R"], seed=seed, n_jobs=int(cfg["jobs"])))
        timing[name] = round(time.perf_counter() - t0, 3)
    ok = all(r["pass"] for r in reports)
    doc = {"version": __version__, "seed": seed, "pass": ok, "suites": reports, "runtime_s": timing}
    text = json.dumps(doc, indent=2)
    if cfg["output"] in (None, "-"):
        print(text)
    else:
        Path(cfg["output"]).write_text(text + "\n", encoding="utf-8")
    return 0 if ok else 1


def render_report(doc: dict) -> str:
    """Plain-text table of a ``verify`` report."""
    lines = [f"seed {doc.get('seed')}  overall: {'PASS' if doc.get('pass') else 'FAIL'}", ""]
    rt = doc.get("runtime_s", {})
    width = max([len(r["suite"]) for r in doc.get("suites", [])] + [5])
    lines.append(f"{'suite':<{width}}  result  {'estimate':>12}  band")
    for r in doc.get("suites", []):
        est = r.get("estimate")
        est_s = f"{est:.6g}" if isinstance(est, (int, float)) and not isinstance(est, bool) else str(est)
        band = r.get("band")
        band_s = "-" if band is None else "[" + ", ".join(f"{b:.6g}" if isinstance(b, (int, float)) else str(b)
                                                          for b in band) + "]"
        tail = f"  ({rt[r['suite']]:.1f} s)" if r["suite"] in rt else ""
        lines.append(f"{r['suite']:<{width}}  {'PASS' if r['pass'] else 'FAIL':<6}  {est_s:>12}  {band_s}{tail}")
    return "\n".join(lines)


def cmd_report(cfg) -> int:
    path = _need(cfg, "input", "report")
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"cannot read report {path}: {e}") from None
    text = render_report(doc)
    if cfg["output"] in (None, "-"):
        print(text)
    else:
        Path(cfg["output"]).write_text(text + "\n", encoding="utf-8")
    return 0 if doc.get("pass") else 1


# ---------------------------------------------------------------------------
# parser


DEFAULTS = {
    "predict": {"train": None, "test": None, "pretrain": None, "method": "split", "alpha": 0.1,
                "predictor": "least_squares", "predictor_params": None, "folds": 5, "seed": None,
                "fit_intercept": True, "output": None},
    "outliers": {"calib": None, "test": None, "pretrain": None, "score_column": None,
                 "predictor": "least_squares", "predictor_params": None, "q": 0.1, "output": None},
    "monitor": {"events": None, "score": "identity", "pretrain": None, "predictor": "least_squares",
                "predictor_params": None, "alpha": 0.1, "B": 1.0, "eta": 0.05, "q1": 0.0,
                "alarm_alpha": 0.05, "lam": 0.5, "resume": None, "snapshot": None, "output": None},
    "calibrate-probs": {"calib": None, "test": None, "method": "isotonic", "bins": 10, "metrics": False,
                        "delta": 0.05, "output": None},
    "test-ci": {"data": None, "test": "marginal", "statistic": "abs_correlation", "budget": 999,
                "alpha": 0.05, "seed": None, "bins": 10, "edges": None, "lipschitz": None, "query": None,
                "ci_method": "discrete", "a": 0.0, "b": 1.0, "bandwidth": 0.1, "output": None},
    "verify": {"suite": None, "R": None, "seed": None, "jobs": 1, "output": None},
    "report": {"input": None, "output": None},
}

COMMANDS = {"predict": cmd_predict, "outliers": cmd_outliers, "monitor": cmd_monitor,
            "calibrate-probs": cmd_calibrate_probs, "test-ci": cmd_test_ci, "verify": cmd_verify,
            "report": cmd_report}


def _json_arg(s):
    try:
        return json.loads(s)
    except json.JSONDecodeError as e:
        raise argparse.ArgumentTypeError(f"not valid JSON: {e}") from None


def _bool_arg(s):
    if s.lower() in ("1", "true", "yes"):
        return True
    if s.lower() in ("0", "false", "no"):
        return False
    raise argparse.ArgumentTypeError("expected true or false")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cpkit", description=__doc__.splitlines()[0],
                                 argument_default=argparse.SUPPRESS)
    ap.add_argument("--version", action="version", version=f"cpkit {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def new(name, help_):
        p = sub.add_parser(name, help=help_, argument_default=argparse.SUPPRESS)
        p.add_argument("--config", default=None, help="JSON file with options; flags override it")
        p.add_argument("--emit-config", default=None, metavar="PATH", help="write the effective config")
        p.add_argument("--output", "-o", help="output path (default stdout)")
        return p

    p = new("predict", "prediction sets for test rows")
    p.add_argument("--train", help="training/calibration CSV")
    p.add_argument("--test", help="test CSV (y optional)")
    p.add_argument("--pretrain", help="CSV used only to fit the predictor (split, mondrian)")
    p.add_argument("--method", choices=["split", "full-ls", "jackknife-plus", "cv-plus", "cross-conformal",
                                        "mondrian"])
    p.add_argument("--alpha", type=float)
    p.add_argument("--predictor", choices=["least_squares", "ridge", "knn"])
    p.add_argument("--predictor-params", type=_json_arg, help='e.g. \'{"lam": 1.0}\'')
    p.add_argument("--folds", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--fit-intercept", type=_bool_arg)

    p = new("outliers", "conformal outlier p-values with Benjamini-Hochberg")
    p.add_argument("--calib", help="CSV of inlier calibration rows")
    p.add_argument("--test", help="CSV of rows to screen")
    p.add_argument("--score-column", help="use a precomputed score column")
    p.add_argument("--pretrain", help="CSV to fit a residual predictor on")
    p.add_argument("--predictor", choices=["least_squares", "ridge", "knn"])
    p.add_argument("--predictor-params", type=_json_arg)
    p.add_argument("--q", type=float, help="target false discovery rate")

    p = new("monitor", "online p-values, martingale alarm and quantile tracking over JSONL events")
    p.add_argument("--events", help="JSONL events (default stdin)")
    p.add_argument("--score", choices=["identity", "residual"])
    p.add_argument("--pretrain")
    p.add_argument("--predictor", choices=["least_squares", "ridge", "knn"])
    p.add_argument("--predictor-params", type=_json_arg)
    p.add_argument("--alpha", type=float, help="tracker miscoverage target")
    p.add_argument("--B", type=float, help="score bound for the tracker")
    p.add_argument("--eta", type=float, help="tracker step size")
    p.add_argument("--q1", type=float, help="initial tracker threshold")
    p.add_argument("--alarm-alpha", type=float, help="martingale alarm level")
    p.add_argument("--lam", type=float, help="power betting parameter")
    p.add_argument("--resume", help="snapshot file to resume from")
    p.add_argument("--snapshot", help="write a snapshot after the last event")

    p = new("calibrate-probs", "recalibrate binary forecasts from a score,label CSV")
    p.add_argument("--calib")
    p.add_argument("--test")
    p.add_argument("--method", choices=["isotonic", "binning", "temperature", "venn-abers"])
    p.add_argument("--bins", type=int)
    p.add_argument("--metrics", action="store_true")
    p.add_argument("--delta", type=float)

    p = new("test-ci", "permutation independence tests and regression confidence intervals")
    p.add_argument("--data")
    p.add_argument("--test", choices=["marginal", "local", "binned", "regression-ci"])
    p.add_argument("--statistic", choices=["abs_correlation", "ks_two_sample"])
    p.add_argument("--budget", help="number of permutations or 'exhaustive'")
    p.add_argument("--alpha", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--bins", type=int)
    p.add_argument("--edges", type=_json_arg)
    p.add_argument("--lipschitz", type=float)
    p.add_argument("--query")
    p.add_argument("--ci-method", choices=["discrete", "binned", "blurred"])
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--bandwidth", type=float)

    p = new("verify", "run Monte Carlo verification suites")
    p.add_argument("--suite", action="append", help="suite id (repeatable; default all)")
    p.add_argument("--R", type=int, help="override the number of trials")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)

    p = new("report", "render a verify report")
    p.add_argument("--input")
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _effective(args, parser, DEFAULTS[args.command])
        return COMMANDS[args.command](cfg)
    except UsageError as e:
        print(f"cpkit {args.command}: error: {e}", file=sys.stderr)
        return 2
    except BrokenPipeError:  # downstream reader closed early, e.g. `| head`
        devnull = os.open(os.devnull, os.O_WRONLY)
        os.dup2(devnull, sys.stdout.fileno())
        return 0


if __name__ == "__main__":
    sys.exit(main())
