"""End-to-end acceptance checks, one marked test (or group) per criterion.

Run ``pytest tests/test_acceptance.py -v``; a summary with one PASS/FAIL/SKIP
line per criterion is printed at the end of the session.
"""

import csv
import os
import time
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from jitcalib import stats
from jitcalib.binning import BinningConfig, DEFAULT_CONFIGS, bin_statistics
from jitcalib.cli import main
from jitcalib.dataset import PredictionSet, dump_predictions, load_commits, split_folds
from jitcalib.metrics import auc, brier, calibration_report, confusion, ece, mce
from jitcalib.protocol import rq2_roles, run_rq1, run_rq2
from jitcalib.recalibration import apply_platt, apply_temperature, fit_platt, fit_temperature

from conftest import bernoulli_logits, synthetic_commits
from oracles import (brute_force_calibration, enumerate_wilcoxon, grid_argmin_platt,
                     grid_argmin_temperature, t_two_sided_p_df2)

acceptance = pytest.mark.acceptance
EW15 = BinningConfig(15, "equiwidth")


def _random_instances(seed=2024, count=1000):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        m = int(rng.integers(1, 51))
        p = rng.random(m)
        kind = rng.integers(3)
        if kind == 1:
            p = np.round(p, 1)  # ties and exact 0 / 1
        elif kind == 2:
            p = rng.choice([0.0, 0.25, 0.5, 1.0, 1 / 3], size=m)
        y = rng.integers(0, 2, m)
        out.append((p, y, int(rng.integers(1, 6)), ("equiwidth", "adaptive")[int(rng.integers(2))]))
    return out


@acceptance(1, "metric oracle equivalence")
def test_metric_oracle_equivalence():
    cases = _random_instances()
    expected = [brute_force_calibration(p.tolist(), y.tolist(), b, s) for p, y, b, s in cases]
    start = time.perf_counter()
    got = []
    for p, y, b, s in cases:
        bins = bin_statistics(y, p, BinningConfig(b, s))
        got.append((ece(bins), mce(bins), brier(y, p), [x.members for x in bins]))
    elapsed = time.perf_counter() - start
    for (e, m, br, counts), (oe, om, ob, ocounts) in zip(got, expected):
        assert counts == ocounts
        assert abs(e - oe) <= 1e-12 and abs(m - om) <= 1e-12 and abs(br - ob) <= 1e-12
    assert elapsed < 5.0, elapsed


@acceptance(2, "hand-computed instance")
def test_hand_computed_instance(four_records):
    r = calibration_report(four_records.true_label, four_records.prob, BinningConfig(2, "equiwidth"))
    # 0.2 + 0.1 and 0.8**2 style sums are not exact in binary; 1e-15 is the representable limit
    assert r.ece == pytest.approx(0.25, abs=1e-15)
    assert r.mce == pytest.approx(0.30, abs=1e-15)
    assert r.brier == pytest.approx(0.15, abs=1e-15)


ALL_CONFIGS = [BinningConfig(b, s) for b in (*range(1, 6), 15, 50) for s in ("equiwidth", "adaptive")]


@acceptance(3, "ECE <= MCE and binning-invariant Brier")
def test_ece_le_mce_and_brier_invariance_on_generated_instances():
    for p, y, _, _ in _random_instances(seed=7, count=300):
        reports = [calibration_report(y, p, cfg) for cfg in ALL_CONFIGS]
        for r in reports:
            assert r.ece <= r.mce + 1e-15
        assert max(r.brier for r in reports) - min(r.brier for r in reports) <= 1e-15


@acceptance(3, "ECE <= MCE and binning-invariant Brier")
@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1), st.integers(0, 1)), min_size=1, max_size=200))
def test_ece_le_mce_and_brier_invariance_property(pairs):
    p = [a for a, _ in pairs]
    y = [b for _, b in pairs]
    reports = [calibration_report(y, p, cfg) for cfg in ALL_CONFIGS]
    assert all(r.ece <= r.mce + 1e-15 for r in reports)
    assert len({r.brier for r in reports}) == 1


@acceptance(4, "Platt and temperature parameter recovery")
def test_platt_recovery(rng):
    q, y = bernoulli_logits(rng, 10_000, lambda q: 2 * q + 1)
    start = time.perf_counter()
    params = fit_platt(q, y)
    assert time.perf_counter() - start < 2.0
    assert params.converged
    assert abs(params.alpha - 2) <= 0.15 and abs(params.beta - 1) <= 0.15
    grid = np.round(np.arange(1.5, 2.5001, 0.01), 2), np.round(np.arange(0.5, 1.5001, 0.01), 2)
    a, b = grid_argmin_platt(q, y, *grid)
    assert abs(params.alpha - a) <= 0.01 and abs(params.beta - b) <= 0.01


@acceptance(4, "Platt and temperature parameter recovery")
def test_temperature_recovery(rng):
    q, y = bernoulli_logits(rng, 10_000, lambda q: q / 2)
    start = time.perf_counter()
    param = fit_temperature(q, y)
    assert time.perf_counter() - start < 2.0
    assert param.converged
    assert abs(param.t - 2) <= 0.1
    assert abs(param.t - grid_argmin_temperature(q, y, np.arange(1.5, 2.5, 0.001))) <= 0.001


def _overconfident(seed=5):
    """Calibration fold and disjoint held-out set of a predictor emitting 3q on Bernoulli(sigmoid(q)) data."""
    rng = np.random.default_rng(seed)
    q_cal, y_cal = bernoulli_logits(rng, 10_000, lambda q: q)
    q_eval, y_eval = bernoulli_logits(rng, 10_000, lambda q: q)
    return (PredictionSet.from_logits(3 * q_cal, y_cal, ids=[f"cal{i}" for i in range(q_cal.size)]),
            PredictionSet.from_logits(3 * q_eval, y_eval, ids=[f"eval{i}" for i in range(q_eval.size)]))


def _reduction(method):
    cal, held_out = _overconfident()
    before = calibration_report(held_out.true_label, held_out.prob, EW15).ece
    if method == "platt":
        after_set = apply_platt(fit_platt(cal), held_out)
    else:
        after_set = apply_temperature(fit_temperature(cal), held_out)
    after = calibration_report(after_set.true_label, after_set.prob, EW15).ece
    return before, after


@acceptance(5, "miscalibration reduction")
def test_miscalibration_reduction():
    before, platt = _reduction("platt")
    _, temp = _reduction("temperature")
    assert platt <= 0.5 * before, (before, platt)
    assert temp <= 0.7 * before, (before, temp)
    assert _reduction("platt") == (before, platt)
    assert _reduction("temperature") == (before, temp)


@acceptance(6, "decision and ranking invariance")
@settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 2**32 - 1), st.integers(10, 400), st.floats(0.1, 5.0), st.floats(-2, 2))
def test_decision_invariance(seed, n, slope, shift):
    rng = np.random.default_rng(seed)
    q = rng.normal(0, 3, n)
    y = (rng.random(n) < 1 / (1 + np.exp(-(slope * q + shift)))).astype(int)
    assume(0 < y.sum() < n)
    preds = PredictionSet.from_logits(q, y)

    temp = apply_temperature(fit_temperature(preds), preds)
    assert np.array_equal(temp.pred_label, preds.pred_label)
    assert confusion(y, temp.prob) == confusion(y, preds.prob)
    assert abs(auc(y, temp.logit) - auc(y, preds.logit)) <= 1e-12

    params = fit_platt(preds)
    assume(params.alpha > 0)
    platt = apply_platt(params, preds)
    assert abs(auc(y, platt.logit) - auc(y, preds.logit)) <= 1e-12


@acceptance(7, "statistical tests against oracles")
def test_stat_oracles():
    t, p, _ = stats.paired_t_test([1, 2, 3], [0, 0, 0])
    assert abs(t - 3.4641) <= 1e-3 and abs(p - 0.0742) <= 1e-3
    assert abs(p - t_two_sided_p_df2(t)) <= 1e-12
    d = [0.5, 1.2, 2.0, 3.1, 4.4, 6.0]
    res = stats.wilcoxon_signed_rank(d, [0] * 6)
    assert res.pvalue == 0.03125
    assert res.pvalue == enumerate_wilcoxon(d)[1]


def _verdict_samples():
    for dist in ("normal", "exponential"):
        for n in (30, 1000):
            for seed in range(5):
                rng = np.random.default_rng(1000 + seed)
                x = rng.standard_normal(n) if dist == "normal" else rng.exponential(1.0, n)
                yield dist, n, seed, x


@acceptance(7, "statistical tests against oracles")
def test_normality_verdicts_match_reference():
    agree = 0
    total = 0
    for dist, n, seed, x in _verdict_samples():
        _, ours = stats.normality_pvalue(x, seed=seed)
        if n < stats.MC_CUTOFF:
            ref = sps.goodness_of_fit(sps.norm, x, statistic="ad", n_mc_samples=9999,
                                      random_state=np.random.default_rng(99 + seed)).pvalue
        else:
            ref = sps.normaltest(x).pvalue
        agree += (ours < 0.05) == (ref < 0.05)
        total += 1
    assert total == 20
    assert agree >= 19, agree


@pytest.fixture(scope="module")
def desk_scale():
    X, y = synthetic_commits(12_000, seed=11)
    train, test = (X[:10_800], y[:10_800]), (X[10_800:], y[10_800:])
    start = time.perf_counter()
    tables = (run_rq1(train, test, seed=0), run_rq2(train, test, method="platt", seed=0),
              run_rq2(train, test, method="temperature", seed=0))
    return train, test, tables, time.perf_counter() - start


@acceptance(8, "protocol shape, determinism and desk-scale runtime")
def test_protocol_shape(desk_scale):
    train, test, tables, elapsed = desk_scale
    assert elapsed < 60.0, elapsed
    for table in tables:
        for cfg in DEFAULT_CONFIGS:
            rows = table.select(binning=cfg)
            assert len(rows) == 110
            assert sum(r.phase == "test" for r in rows) == 10


@acceptance(8, "protocol shape, determinism and desk-scale runtime")
def test_protocol_roles_disjoint():
    for r in range(10):
        plan = split_folds(10_800, 10, seed=r)
        for v, c, tr, cal, val in rq2_roles(plan):
            assert v != c
            assert not (set(tr) & set(cal) or set(tr) & set(val) or set(cal) & set(val))
            assert len(tr) + len(cal) + len(val) == 10_800


@acceptance(8, "protocol shape, determinism and desk-scale runtime")
def test_protocol_byte_identical(desk_scale):
    train, test, tables, _ = desk_scale
    again = run_rq2(train, test, method="platt", seed=0)
    assert again.to_csv() == tables[1].to_csv()
    assert run_rq1(train, test, seed=0).to_csv() == tables[0].to_csv()


REPLICATION_DIR = os.environ.get("JITCALIB_REPLICATION_DATA")
REPLICATION = {
    # dataset: (test AUC, test ECE equiwidth-15, precision, recall)
    "openstack": (0.75, 0.09, 0.68, 0.078),
    "qt": (0.74, 0.03, None, None),
}


def _load_real(path):
    with open(path, newline="") as fh:
        header = next(csv.reader(fh))
    keep = {"la", "bug", "label"}
    with open(path, "rb") as fh:
        return load_commits(fh, exclude=[c for c in header if c not in keep])


@acceptance(9, "conditional replication on public commit data")
@pytest.mark.skipif(not REPLICATION_DIR, reason="set JITCALIB_REPLICATION_DATA to a directory holding "
                                                "{openstack,qt}_{train,test}.csv")
@pytest.mark.parametrize("name", sorted(REPLICATION))
def test_replication(name):
    root = Path(REPLICATION_DIR)
    train = _load_real(root / f"{name}_train.csv")
    test = _load_real(root / f"{name}_test.csv")
    if name == "qt":
        assert len(train) == 22579
    table = run_rq1(train, test, binnings=(EW15,), seed=0)
    rows = table.select(phase="test")
    want_auc, want_ece, want_precision, want_recall = REPLICATION[name]
    assert abs(np.mean([r.auc for r in rows]) - want_auc) <= 0.03
    assert abs(np.mean([r.ece for r in rows]) - want_ece) <= 0.04
    if want_precision is not None:
        assert abs(np.mean([r.precision for r in rows]) - want_precision) <= 0.05
        assert abs(np.mean([r.recall for r in rows]) - want_recall) <= 0.03


def _deep_model_export(seed=3, reps=10, folds=10, n=80):
    """Prediction export shaped like an externally trained model's cross-validation run."""
    rng = np.random.default_rng(seed)
    probs, labels, meta = [], [], {"repetition": [], "fold": [], "role": []}
    for r in range(reps):
        for f in [*range(folds), "test"]:
            for role in ("calibration", "test" if f == "test" else "validation"):
                q = rng.normal(-1.5, 1.5, n)
                probs.extend(1 / (1 + np.exp(-2.5 * q)))
                labels.extend((rng.random(n) < 1 / (1 + np.exp(-q))).astype(int))
                for key, value in (("repetition", r), ("fold", f), ("role", role)):
                    meta[key].extend([str(value)] * n)
    return PredictionSet.from_probs(probs, labels, meta=meta)


@acceptance(9, "conditional replication on public commit data")
def test_external_exports_produce_table_shape(tmp_path):
    path = tmp_path / "deepjit.csv"
    path.write_text(dump_predictions(_deep_model_export(), None))
    out = tmp_path / "out"
    assert main(["experiment", str(path), "--external", "--bins", "15", "--out", str(out)]) == 0
    text = (out / "comparison.txt").read_text()
    for label in ("Test_Avg (OG)", "Val. Min-Max", "Test_Avg (Platt)", "Test_Avg (Temp)",
                  "Stat. Sign. val (OG-Platt)", "Stat. Sign. test (OG-Temp)"):
        assert label in text
    for name in ("measurements_rq1.csv", "measurements_rq2_platt.csv", "measurements_rq2_temperature.csv"):
        lines = (out / name).read_text().splitlines()
        assert len(lines) == 1 + 2 * 110  # equiwidth-15 and adaptive-15


def _curve(path):
    with open(path, newline="") as fh:
        return [{k: float(v) for k, v in row.items() if k != "curve"} for row in csv.DictReader(fh)]


@acceptance(10, "reliability diagram fidelity")
def test_reliability_figure_fidelity(tmp_path):
    cal, held_out = _overconfident()
    cal_path, eval_path = tmp_path / "cal.csv", tmp_path / "eval.csv"
    cal_path.write_text(dump_predictions(cal, None))
    eval_path.write_text(dump_predictions(held_out, None))
    common = ["--bins", "15", "--schema", "equiwidth"]
    assert main(["recalibrate", str(cal_path), str(eval_path), "--method", "platt",
                 "--out", str(tmp_path / "r"), *common]) == 0
    assert main(["metrics", str(eval_path), "--out", str(tmp_path / "before"), *common]) == 0
    assert main(["metrics", str(tmp_path / "r" / "recalibrated_platt.csv"),
                 "--out", str(tmp_path / "after"), *common]) == 0
    assert (tmp_path / "before" / "reliability_equiwidth-15.svg").exists()

    before = _curve(tmp_path / "before" / "reliability_equiwidth-15.csv")
    after = _curve(tmp_path / "after" / "reliability_equiwidth-15.csv")
    upper = [pt for pt in before if pt["confidence"] > 0.5]
    assert upper
    for pt in upper:
        assert pt["accuracy"] < pt["confidence"], pt
    heavy = [pt for pt in after if pt["fraction"] >= 0.05]
    assert heavy
    for pt in heavy:
        assert abs(pt["accuracy"] - pt["confidence"]) <= 0.1, pt
