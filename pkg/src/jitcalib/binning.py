"""Probability binning under the equal-width and equal-frequency schemas."""

import csv
import io
from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_probs, check_scores
from .exceptions import ConfigurationError

SCHEMAS = ("equiwidth", "adaptive")
PRESET_BINS = (15, 50)


@dataclass(frozen=True)
class BinningConfig:
    n_bins: int = 15
    schema: str = "equiwidth"

    def __post_init__(self):
        if int(self.n_bins) != self.n_bins or self.n_bins < 1:
            raise ConfigurationError(f"bin count must be a positive integer, got {self.n_bins!r}")
        if self.schema not in SCHEMAS:
            raise ConfigurationError(f"unknown binning schema {self.schema!r}; expected one of {SCHEMAS}")

    @property
    def name(self):
        return f"{self.schema}-{self.n_bins}"

    @classmethod
    def parse(cls, text):
        """Inverse of :attr:`name`."""
        schema, _, n = text.rpartition("-")
        return cls(int(n), schema)


DEFAULT_CONFIGS = tuple(BinningConfig(b, s) for b in PRESET_BINS for s in SCHEMAS)


@dataclass(frozen=True)
class Bin:
    """One bin ``(lo, hi]``; bin 1 also holds probability 0."""

    index: int
    lo: float
    hi: float
    members: int
    accuracy: Optional[float]
    confidence: Optional[float]

    @property
    def empty(self):
        return self.members == 0

    @property
    def gap(self):
        return None if self.empty else abs(self.accuracy - self.confidence)


def make_edges(y_prob, config: BinningConfig):
    """Return the ``n_bins + 1`` bin edges, starting at 0 and ending at 1.

    Adaptive edges are empirical quantiles with linear interpolation between
    order statistics, so tied probabilities can collapse neighbouring edges.
    """
    B = config.n_bins
    if config.schema == "equiwidth":
        return np.arange(B + 1) / B
    p = check_probs(y_prob)
    if p.size == 0:
        raise ConfigurationError("adaptive binning needs at least one prediction")
    s = np.sort(p)
    # quantile position (M - 1) * k / B split into integer part and remainder
    # with integer arithmetic, so positions that are whole numbers stay exact
    num = (s.size - 1) * np.arange(B + 1)
    lo = num // B
    frac = (num % B) / B
    hi = np.minimum(lo + 1, s.size - 1)
    edges = s[lo] + frac * (s[hi] - s[lo])
    edges[0], edges[-1] = 0.0, 1.0
    return edges


def assign_bins(y_prob, edges):
    """1-based bin index of every probability: ``p`` goes to ``b`` when
    ``edges[b-1] < p <= edges[b]``; ``p == 0`` goes to bin 1."""
    p = check_probs(y_prob)
    idx = np.searchsorted(np.asarray(edges, dtype=float), p, side="left")
    return np.maximum(idx, 1)


def bin_statistics(y_true, y_prob, config: BinningConfig):
    """Per-bin member count, fraction of positives (accuracy) and mean probability."""
    y, p = check_scores(y_true, y_prob)
    edges = make_edges(p, config)
    B = config.n_bins
    idx = assign_bins(p, edges) - 1
    counts = np.bincount(idx, minlength=B)
    positives = np.bincount(idx, weights=y, minlength=B)
    prob_sums = np.bincount(idx, weights=p, minlength=B)
    bins = []
    for b in range(B):
        n = int(counts[b])
        bins.append(Bin(
            index=b + 1,
            lo=float(edges[b]),
            hi=float(edges[b + 1]),
            members=n,
            accuracy=float(positives[b] / n) if n else None,
            confidence=float(prob_sums[b] / n) if n else None,
        ))
    return bins


def bins_to_csv(bins, dest=None):
    """Write a bin table (bin, lo, hi, members, confidence, accuracy).

    Empty bins have blank confidence/accuracy cells. Returns the text when
    ``dest`` is None.
    """
    fh = io.StringIO() if dest is None else dest
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["bin", "lo", "hi", "members", "confidence", "accuracy"])
    for b in bins:
        w.writerow([b.index, repr(b.lo), repr(b.hi), b.members,
                    "" if b.empty else repr(b.confidence),
                    "" if b.empty else repr(b.accuracy)])
    if dest is None:
        return fh.getvalue()


class ProbabilityBinner(TransformerMixin, BaseEstimator):
    """Learn bin edges from probabilities and map probabilities to bins.

    Parameters
    ----------
    n_bins : int, default=15
    schema : {"equiwidth", "adaptive"}, default="equiwidth"

    Attributes
    ----------
    edges_ : ndarray of shape (n_bins + 1,)
    """

    def __init__(self, n_bins=15, schema="equiwidth"):
        self.n_bins = n_bins
        self.schema = schema

    def fit(self, X, y=None):
        p = _flat(X)
        self.edges_ = make_edges(p, BinningConfig(self.n_bins, self.schema))
        return self

    def transform(self, X):
        check_is_fitted(self, "edges_")
        return assign_bins(_flat(X), self.edges_).reshape(-1, 1)


def _flat(X):
    X = np.asarray(X, dtype=float)
    return X[:, 0] if X.ndim == 2 and X.shape[1] == 1 else X
