"""Repeated cross-validation experiments measuring (mis)calibration before and
after post-hoc recalibration, and their paired comparison.

``run_rq1``
    per repetition: shuffle and split the training data into K folds; each
    fold in turn is the validation fold for a model trained on the rest; the
    model with the best validation AUC then predicts the test set.
``run_rq2``
    as above, but one more fold per rotation is held out for fitting the
    calibrator: the fold after the validation fold (cyclically). The model
    trains on the remaining K - 2 folds.
``compare``
    averages test rows, reports validation min/max and runs paired
    significance tests on matched rows of two tables.
"""

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .binning import DEFAULT_CONFIGS, BinningConfig
from .dataset import PredictionSet, feature_matrix, split_folds
from .exceptions import ComparisonError, ConfigurationError, FitError, UndefinedInputError
from .metrics import auc, calibration_report, confusion, percent
from .predictor import LAPredict
from .recalibration import apply_params, fit_calibrator
from .stats import significance

METHODS = ("none", "platt", "temperature")
CALIBRATION_METRICS = ("ece", "mce", "brier")
ROTATION_RULE = "calibration fold = (validation fold + 1) mod K"

CSV_COLUMNS = ("repetition", "phase", "fold", "method", "schema", "n_bins", "ece", "mce", "brier",
               "auc", "precision", "recall", "model_ref", "fold_digest")


@dataclass(frozen=True)
class ModelConfig:
    features: tuple = ("la",)
    l2: float = 1.0
    max_iter: int = 100
    tol: float = 1e-8

    def build(self):
        return LAPredict(features=tuple(self.features), l2=self.l2, max_iter=self.max_iter, tol=self.tol)


@dataclass(frozen=True)
class MeasurementRecord:
    repetition: int
    phase: str
    fold: object
    method: str
    binning: BinningConfig
    ece: float
    mce: float
    brier: float
    auc: Optional[float]
    precision: Optional[float]
    recall: Optional[float]
    model_ref: str
    fold_digest: str = ""

    @property
    def key(self):
        return (self.repetition, self.fold, self.binning.name)


def _fold_sort_key(fold):
    return (1, 0) if fold == "test" else (0, int(fold))


@dataclass
class MeasurementTable:
    """Rows of an experiment plus the bookkeeping needed to compare runs.

    ``skipped`` lists rotations or test evaluations that produced no rows,
    each with a reason. ``test_predictions`` maps repetition to the
    (possibly recalibrated) test-set predictions; it is not serialized.
    """

    rows: list
    method: str = "none"
    k: Optional[int] = None
    repetitions: Optional[int] = None
    seed: Optional[int] = None
    skipped: list = field(default_factory=list)
    test_predictions: dict = field(default_factory=dict, repr=False)
    calibrators: dict = field(default_factory=dict, repr=False)
    notes: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def sorted_rows(self):
        order = {c.name: i for i, c in enumerate(self.binnings())}
        return sorted(self.rows, key=lambda r: (r.repetition, _fold_sort_key(r.fold), order[r.binning.name]))

    def binnings(self):
        seen = {}
        for r in self.rows:
            seen.setdefault(r.binning.name, r.binning)
        return list(seen.values())

    def select(self, phase=None, binning=None):
        return [r for r in self.rows
                if (phase is None or r.phase == phase) and (binning is None or r.binning == binning)]

    def to_csv(self, dest=None):
        fh = io.StringIO() if dest is None else dest
        own = isinstance(dest, (str, os.PathLike))
        if own:
            fh = open(dest, "w", newline="", encoding="utf-8")
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in self.sorted_rows():
                w.writerow([r.repetition, r.phase, r.fold, r.method, r.binning.schema, r.binning.n_bins,
                            *(_fmt(getattr(r, c)) for c in ("ece", "mce", "brier", "auc", "precision", "recall")),
                            r.model_ref, r.fold_digest])
            if dest is None:
                return fh.getvalue()
        finally:
            if own:
                fh.close()

    @classmethod
    def from_csv(cls, source):
        if isinstance(source, (str, os.PathLike)):
            with open(source, newline="", encoding="utf-8") as fh:
                return cls.from_csv(fh)
        rows = []
        for d in csv.DictReader(source):
            fold = d["fold"] if d["fold"] == "test" else int(d["fold"])
            rows.append(MeasurementRecord(
                repetition=int(d["repetition"]), phase=d["phase"], fold=fold, method=d["method"],
                binning=BinningConfig(int(d["n_bins"]), d["schema"]),
                ece=float(d["ece"]), mce=float(d["mce"]), brier=float(d["brier"]),
                auc=_opt(d["auc"]), precision=_opt(d["precision"]), recall=_opt(d["recall"]),
                model_ref=d["model_ref"], fold_digest=d.get("fold_digest", ""),
            ))
        method = rows[0].method if rows else "none"
        return cls(rows=rows, method=method)


def _fmt(v):
    return "" if v is None else repr(float(v))


def _opt(s):
    return None if s == "" else float(s)


def _as_xy(data, features):
    if isinstance(data, tuple) and len(data) == 2:
        X, y = data
        X = np.asarray(X, dtype=float)
        return (X.reshape(-1, 1) if X.ndim == 1 else X), np.asarray(y, dtype=np.int64)
    return feature_matrix(list(data), features)


def measure(predictions, *, repetition, phase, fold, method, binnings, model_ref, fold_digest=""):
    """One :class:`MeasurementRecord` per binning configuration."""
    acc = confusion(predictions.true_label, predictions.prob, threshold=predictions.threshold)
    try:
        area = auc(predictions.true_label, predictions.logit)
    except UndefinedInputError:
        area = None
    out = []
    for cfg in binnings:
        rep = calibration_report(predictions.true_label, predictions.prob, cfg)
        out.append(MeasurementRecord(repetition, phase, fold, method, cfg, rep.ece, rep.mce, rep.brier,
                                     area, acc.precision, acc.recall, model_ref, fold_digest))
    return out


def rq2_roles(plan):
    """Yield ``(validation_fold, calibration_fold, train_idx, cal_idx, val_idx)`` per rotation."""
    folds = plan.folds()
    k = plan.k
    for v in range(k):
        c = (v + 1) % k
        train = np.concatenate([folds[f] for f in range(k) if f not in (v, c)])
        yield v, c, np.sort(train), folds[c], folds[v]


def _predict(model, X, y):
    return PredictionSet.from_logits(model.decision_function(X), y)


def _safe_auc(preds):
    try:
        return auc(preds.true_label, preds.logit)
    except UndefinedInputError:
        return None


def _run(train_data, test_data, model_config, method, k, repetitions, seed, binnings, stratify):
    if method not in METHODS:
        raise ConfigurationError(f"unknown method {method!r}; expected one of {METHODS}")
    min_k = 2 if method == "none" else 3
    if k < min_k:
        raise ConfigurationError(f"K must be at least {min_k} for method {method!r}, got {k}")
    model_config = model_config or ModelConfig()
    binnings = tuple(binnings)
    X, y = _as_xy(train_data, model_config.features)
    X_test, y_test = _as_xy(test_data, model_config.features)
    table = MeasurementTable(rows=[], method=method, k=k, repetitions=repetitions, seed=seed)
    if method != "none":
        table.notes.append(ROTATION_RULE)

    for r in range(repetitions):
        plan = split_folds(len(y), k, seed + r, stratify=y if stratify else None)
        digest = plan.digest()
        if method == "none":
            folds = plan.folds()
            rotations = [(v, None, np.sort(np.concatenate([folds[f] for f in range(k) if f != v])), None, folds[v])
                         for v in range(k)]
        else:
            rotations = list(rq2_roles(plan))

        candidates = []
        aborted = False
        for v, c, train_idx, cal_idx, val_idx in rotations:
            ref = f"rep{r}-fold{v}"
            try:
                model = model_config.build().fit(X[train_idx], y[train_idx])
            except FitError as exc:
                table.skipped.append({"repetition": r, "fold": v, "reason": f"training failed: {exc}"})
                aborted = True
                break
            calibrator = None
            if method != "none":
                try:
                    calibrator = fit_calibrator(method, _predict(model, X[cal_idx], y[cal_idx]))
                except FitError as exc:
                    table.skipped.append({"repetition": r, "fold": v,
                                          "reason": f"calibration fold {c}: {exc}"})
                    continue
            raw = _predict(model, X[val_idx], y[val_idx])
            preds = raw if calibrator is None else apply_params(calibrator, raw)
            table.rows += measure(preds, repetition=r, phase="validation", fold=v, method=method,
                                  binnings=binnings, model_ref=ref, fold_digest=digest)
            score = _safe_auc(raw)
            if score is None:
                table.skipped.append({"repetition": r, "fold": v,
                                      "reason": "single-class validation fold; excluded from model selection"})
            else:
                candidates.append((score, v, model, calibrator))
        if aborted:
            continue
        if not candidates:
            table.skipped.append({"repetition": r, "fold": "test", "reason": "no model eligible for selection"})
            continue
        best_auc, best_v, model, calibrator = max(candidates, key=lambda t: (t[0], -t[1]))
        raw = _predict(model, X_test, y_test)
        preds = raw if calibrator is None else apply_params(calibrator, raw)
        table.rows += measure(preds, repetition=r, phase="test", fold="test", method=method,
                              binnings=binnings, model_ref=f"rep{r}-fold{best_v}", fold_digest=digest)
        table.test_predictions[r] = preds
        if calibrator is not None:
            table.calibrators[r] = calibrator
    return table


def run_rq1(train_data, test_data, model_config=None, k=10, repetitions=10, seed=0,
            binnings=DEFAULT_CONFIGS, stratify=False):
    """Measure the uncalibrated model. ``train_data``/``test_data`` are
    sequences of :class:`~jitcalib.dataset.LabeledInstance` or ``(X, y)`` pairs."""
    return _run(train_data, test_data, model_config, "none", k, repetitions, seed, binnings, stratify)


def run_rq2(train_data, test_data, model_config=None, method="platt", k=10, repetitions=10, seed=0,
            binnings=DEFAULT_CONFIGS, stratify=False):
    """Measure the model after recalibration with ``method`` (platt or temperature)."""
    if method == "none":
        raise ConfigurationError("run_rq2 needs a calibration method")
    return _run(train_data, test_data, model_config, method, k, repetitions, seed, binnings, stratify)


def run_external(predictions: PredictionSet, method="none", binnings=DEFAULT_CONFIGS):
    """Measurement table from an exported prediction file.

    The export needs ``repetition``, ``fold`` and ``role`` columns: rows with
    role ``validation`` or ``test`` are evaluated, rows with role
    ``calibration`` in the same (repetition, fold) group fit the calibrator.
    Test rows use fold ``test``.
    """
    if method not in METHODS:
        raise ConfigurationError(f"unknown method {method!r}")
    for col in ("repetition", "fold", "role"):
        if col not in predictions.meta:
            raise ConfigurationError(f"external predictions need a {col!r} column")
    reps = np.array([int(v) for v in predictions.meta["repetition"]])
    folds = np.array(predictions.meta["fold"], dtype=object)
    roles = np.array(predictions.meta["role"], dtype=object)
    table = MeasurementTable(rows=[], method=method)
    groups = sorted({(r, f) for r, f in zip(reps, folds)}, key=lambda g: (g[0], _fold_sort_key(g[1])))
    for r, f in groups:
        in_group = (reps == r) & (folds == f)
        phase = "test" if f == "test" else "validation"
        fold = "test" if f == "test" else int(f)
        evaluate = predictions.subset(in_group & (roles == phase))
        if len(evaluate) == 0:
            continue
        if method != "none":
            cal = predictions.subset(in_group & (roles == "calibration"))
            try:
                if len(cal) == 0:
                    raise FitError("no calibration rows")
                params = fit_calibrator(method, cal)
            except FitError as exc:
                table.skipped.append({"repetition": int(r), "fold": fold, "reason": str(exc)})
                continue
            evaluate = apply_params(params, evaluate)
        table.rows += measure(evaluate, repetition=int(r), phase=phase, fold=fold, method=method,
                              binnings=binnings, model_ref=f"rep{r}-fold{f}")
        if phase == "test":
            table.test_predictions[int(r)] = evaluate
    table.repetitions = len(set(reps.tolist()))
    return table


@dataclass(frozen=True)
class ComparisonRow:
    """One metric/binning cell of a before/after comparison (values are fractions)."""

    metric: str
    binning: Optional[BinningConfig]
    test_avg_before: float
    test_avg_after: float
    delta: float
    val_range_before: tuple
    val_range_after: tuple
    significance_validation: object
    significance_test: object

    @property
    def label(self):
        return self.metric if self.binning is None else f"{self.metric} {self.binning.name}"

    @property
    def magnitude(self):
        """Change class on rounded percentages: ↓↓ / ↓ / • / ↑ / ↑↑ (10-point boundary)."""
        d = percent(self.test_avg_after) - percent(self.test_avg_before)
        if d == 0:
            return "•"
        if d < 0:
            return "↓↓" if d < -10 else "↓"
        return "↑↑" if d > 10 else "↑"

    def to_dict(self):
        return {
            "metric": self.metric,
            "schema": None if self.binning is None else self.binning.schema,
            "bins": None if self.binning is None else self.binning.n_bins,
            "test_avg_before": self.test_avg_before,
            "test_avg_after": self.test_avg_after,
            "delta": self.delta,
            "magnitude": self.magnitude,
            "val_min_max_before": list(self.val_range_before),
            "val_min_max_after": list(self.val_range_after),
            "significance_validation": _sig_dict(self.significance_validation),
            "significance_test": _sig_dict(self.significance_test),
        }


def _sig_dict(s):
    return None if s is None else s.to_dict()


def _index(rows):
    return {(r.repetition, r.fold): r for r in rows}


def _digests(table):
    return {r.repetition: r.fold_digest for r in table.rows if r.fold_digest}


def compare(before: MeasurementTable, after: MeasurementTable, metrics=CALIBRATION_METRICS, seed=0):
    """Per metric and binning: test averages, delta, validation ranges and
    paired significance on validation rows and on test rows separately."""
    names_b = {c.name for c in before.binnings()}
    names_a = {c.name for c in after.binnings()}
    unmatched = sorted(names_b ^ names_a)
    d_b, d_a = _digests(before), _digests(after)
    unmatched += [f"repetition {r}: fold structure differs" for r in sorted(set(d_b) & set(d_a))
                  if d_b[r] != d_a[r]]
    if unmatched:
        raise ComparisonError(unmatched)

    out = []
    configs = [c for c in before.binnings()]
    for metric in metrics:
        targets = [None] if metric == "brier" else configs
        for cfg in targets:
            use = cfg or configs[0]
            rb = _index(before.select(binning=use))
            ra = _index(after.select(binning=use))
            if set(rb) != set(ra):
                raise ComparisonError(sorted(map(str, set(rb) ^ set(ra))))
            val_keys = sorted(k for k in rb if k[1] != "test")
            test_keys = sorted(k for k in rb if k[1] == "test")
            vb = np.array([getattr(rb[k], metric) for k in val_keys])
            va = np.array([getattr(ra[k], metric) for k in val_keys])
            tb = np.array([getattr(rb[k], metric) for k in test_keys])
            ta = np.array([getattr(ra[k], metric) for k in test_keys])
            name = metric if cfg is None else f"{metric}:{cfg.name}"
            avg_b = float(tb.mean()) if tb.size else math.nan
            avg_a = float(ta.mean()) if ta.size else math.nan
            out.append(ComparisonRow(
                metric=metric, binning=cfg,
                test_avg_before=avg_b, test_avg_after=avg_a, delta=avg_a - avg_b,
                val_range_before=_range(vb), val_range_after=_range(va),
                significance_validation=significance(vb, va, name, seed=seed) if vb.size else None,
                significance_test=significance(tb, ta, name, seed=seed) if tb.size else None,
            ))
    return out


def _range(x):
    return (float(x.min()), float(x.max())) if x.size else (math.nan, math.nan)


def _pct(v):
    return "-" if v is None or (isinstance(v, float) and math.isnan(v)) else str(percent(v))


def _yes(s):
    return "-" if s is None else ("Yes" if s.significant else "No")


_METHOD_LABEL = {"none": "OG", "platt": "Platt", "temperature": "Temp"}


def render_comparison(comparisons, *, title=""):
    """Plain-text table with Test_Avg, Val. Min-Max and Stat. Sign. rows.

    ``comparisons`` maps a method name to the rows returned by :func:`compare`
    against the uncalibrated run; all values are rounded percentages.
    """
    first = next(iter(comparisons.values()))
    headers = [r.label.replace("ece", "ECE").replace("mce", "MCE").replace("brier", "Brier") for r in first]
    lines = []

    def emit(label, cells):
        lines.append([label, *cells])

    emit("Test_Avg (OG)", [_pct(r.test_avg_before) for r in first])
    emit("Val. Min-Max", [f"{_pct(r.val_range_before[0])}-{_pct(r.val_range_before[1])}" for r in first])
    for method, rows in comparisons.items():
        tag = _METHOD_LABEL.get(method, method)
        emit(f"Test_Avg ({tag})", [f"{_pct(r.test_avg_after)} {r.magnitude}" for r in rows])
        emit("Val. Min-Max", [f"{_pct(r.val_range_after[0])}-{_pct(r.val_range_after[1])}" for r in rows])
        emit(f"Stat. Sign. val (OG-{tag})", [_yes(r.significance_validation) for r in rows])
        emit(f"Stat. Sign. test (OG-{tag})", [_yes(r.significance_test) for r in rows])
    table = [["Data subset", *headers], *lines]
    widths = [max(len(row[i]) for row in table) for i in range(len(table[0]))]
    text = "\n".join("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in table)
    return (f"{title}\n{text}\n" if title else text + "\n")


def comparison_to_json(comparisons):
    return json.dumps({m: [r.to_dict() for r in rows] for m, rows in comparisons.items()},
                      indent=2, sort_keys=True, ensure_ascii=False)
