"""Calibration error metrics (ECE, MCE, Brier), reliability series and the
threshold/ranking metrics used for model selection."""

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from ._validation import THRESHOLD, check_labels, check_scores
from .binning import BinningConfig, bin_statistics
from .exceptions import UndefinedInputError


@dataclass(frozen=True)
class CalibrationReport:
    ece: float
    mce: float
    brier: float
    binning: BinningConfig
    bins: tuple = field(repr=False)
    m: int

    @property
    def n_empty(self):
        return sum(b.empty for b in self.bins)

    def to_records(self):
        """Rows keyed by metric, schema and bin count (Brier is binning-free)."""
        key = {"schema": self.binning.schema, "bins": self.binning.n_bins}
        return [
            {"metric": "ece", **key, "value": self.ece},
            {"metric": "mce", **key, "value": self.mce},
            {"metric": "brier", "schema": None, "bins": None, "value": self.brier},
        ]


@dataclass(frozen=True)
class AccuracyReport:
    auc: Optional[float]
    precision: Optional[float]
    recall: Optional[float]
    accuracy: float
    f1: Optional[float]
    tp: int
    fp: int
    tn: int
    fn: int

    def to_dict(self):
        return asdict(self)


def ece(bins, m=None):
    """Member-weighted mean of ``|accuracy - confidence|`` over nonempty bins."""
    if m is None:
        m = sum(b.members for b in bins)
    if m <= 0:
        raise UndefinedInputError("ECE is undefined for an empty prediction set")
    return float(sum(b.members / m * b.gap for b in bins if not b.empty))


def mce(bins):
    gaps = [b.gap for b in bins if not b.empty]
    if not gaps:
        raise UndefinedInputError("MCE is undefined when every bin is empty")
    return float(max(gaps))


def brier(y_true, y_prob):
    y, p = check_scores(y_true, y_prob)
    return float(np.mean((p - y) ** 2))


def reliability_series(bins):
    """(confidence, accuracy, members) for each nonempty bin, in bin order."""
    return [(b.confidence, b.accuracy, b.members) for b in bins if not b.empty]


def auc(y_true, y_score):
    """Area under the ROC curve via the Mann-Whitney rank statistic.

    ``y_score`` may be probabilities or any monotone transform of them
    (logits give the same value without saturation ties).
    """
    y = check_labels(y_true)
    s = np.asarray(y_score, dtype=float)
    if s.shape != y.shape:
        raise ValueError("y_true and y_score must have the same shape")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedInputError("AUC needs at least one positive and one negative label")
    ranks = rankdata(s)
    return float((ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def confusion(y_true, y_prob, threshold=THRESHOLD):
    """Confusion counts with ``prob >= threshold`` predicted defective.

    Ratios whose denominator is zero are reported as None. ``auc`` is filled
    in when both classes are present.
    """
    y, p = check_scores(y_true, y_prob)
    pred = p >= threshold
    tp = int(np.sum(pred & (y == 1)))
    fp = int(np.sum(pred & (y == 0)))
    fn = int(np.sum(~pred & (y == 1)))
    tn = int(np.sum(~pred & (y == 0)))
    try:
        area = auc(y, p)
    except UndefinedInputError:
        area = None
    f1_den = 2 * tp + fp + fn
    return AccuracyReport(
        auc=area,
        precision=tp / (tp + fp) if tp + fp else None,
        recall=tp / (tp + fn) if tp + fn else None,
        accuracy=(tp + tn) / y.size,
        f1=2 * tp / f1_den if f1_den else None,
        tp=tp, fp=fp, tn=tn, fn=fn,
    )


def calibration_report(y_true, y_prob, config=BinningConfig()):
    y, p = check_scores(y_true, y_prob)
    bins = bin_statistics(y, p, config)
    return CalibrationReport(
        ece=ece(bins, y.size),
        mce=mce(bins),
        brier=brier(y, p),
        binning=config,
        bins=tuple(bins),
        m=int(y.size),
    )


def percent(value):
    """Rounded percentage for display (round half to even)."""
    return None if value is None else int(round(100 * value))
