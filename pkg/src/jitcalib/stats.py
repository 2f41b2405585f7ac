"""Normality-gated paired significance tests for calibration metric samples.

Routing used by :func:`significance`: normality of the paired differences is
checked with a Monte Carlo Anderson-Darling test below 50 pairs and with the
D'Agostino-Pearson omnibus test otherwise. Normal differences go to the
paired t-test, anything else to the Wilcoxon signed-rank test. Everything is
two-sided at the 0.05 level.
"""

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import log_ndtr, stdtr
from scipy.stats import rankdata

from .exceptions import ApplicabilityError, DegenerateSampleError, ValidationError

ALPHA = 0.05
MC_CUTOFF = 50
EXACT_WILCOXON_MAX_N = 25


class TestResult(NamedTuple):
    statistic: float
    pvalue: float
    degenerate: bool = False


@dataclass(frozen=True)
class SignificanceResult:
    metric_name: str
    n: int
    normality_test: str
    normality_p: float
    chosen_test: str
    statistic: float
    p_value: float
    significant: bool
    note: str = ""

    def to_dict(self):
        d = asdict(self)
        for k in ("normality_p", "statistic", "p_value"):
            if isinstance(d[k], float) and math.isnan(d[k]):
                d[k] = None
        return d


def _norm_sf(z):
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _sample(x, name="sample"):
    x = np.asarray(x, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise ValidationError(f"{name} contains non-finite values")
    return x


def _skew_z(x):
    n = x.size
    d = x - x.mean()
    m2 = np.mean(d ** 2)
    b1 = np.mean(d ** 3) / m2 ** 1.5
    y = b1 * math.sqrt((n + 1) * (n + 3) / (6.0 * (n - 2)))
    beta2 = 3.0 * (n * n + 27 * n - 70) * (n + 1) * (n + 3) / ((n - 2.0) * (n + 5) * (n + 7) * (n + 9))
    w2 = -1.0 + math.sqrt(2.0 * (beta2 - 1.0))
    delta = 1.0 / math.sqrt(0.5 * math.log(w2))
    alpha = math.sqrt(2.0 / (w2 - 1.0))
    if y == 0:
        y = 1.0
    return delta * math.log(y / alpha + math.sqrt((y / alpha) ** 2 + 1.0))


def _kurtosis_z(x):
    n = x.size
    d = x - x.mean()
    b2 = np.mean(d ** 4) / np.mean(d ** 2) ** 2
    mean_b2 = 3.0 * (n - 1) / (n + 1)
    var_b2 = 24.0 * n * (n - 2) * (n - 3) / ((n + 1.0) ** 2 * (n + 3) * (n + 5))
    xs = (b2 - mean_b2) / math.sqrt(var_b2)
    sqrt_beta1 = (6.0 * (n * n - 5 * n + 2) / ((n + 7.0) * (n + 9))
                  * math.sqrt(6.0 * (n + 3) * (n + 5) / (n * (n - 2.0) * (n - 3))))
    a = 6.0 + 8.0 / sqrt_beta1 * (2.0 / sqrt_beta1 + math.sqrt(1.0 + 4.0 / sqrt_beta1 ** 2))
    term1 = 1.0 - 2.0 / (9.0 * a)
    denom = 1.0 + xs * math.sqrt(2.0 / (a - 4.0))
    if denom == 0:
        term2 = 0.0
    else:
        term2 = math.copysign(abs((1.0 - 2.0 / a) / denom) ** (1.0 / 3.0), denom)
    return (term1 - term2) / math.sqrt(2.0 / (9.0 * a))


def dagostino_pearson(sample):
    """p-value of the omnibus K^2 = Z(skewness)^2 + Z(kurtosis)^2 normality test.

    K^2 is referred to a chi-square with two degrees of freedom, whose
    survival function is ``exp(-K^2 / 2)``.
    """
    x = _sample(sample)
    if x.size < 20:
        raise ApplicabilityError(f"D'Agostino-Pearson needs n >= 20, got {x.size}")
    if np.ptp(x) == 0:
        raise DegenerateSampleError("sample has zero variance")
    k2 = _skew_z(x) ** 2 + _kurtosis_z(x) ** 2
    return math.exp(-0.5 * k2)


def anderson_darling(x):
    """A^2 distance of each row of ``x`` to a normal with the row's own
    mean and (ddof=1) standard deviation."""
    x = np.sort(np.atleast_2d(np.asarray(x, dtype=float)), axis=-1)
    n = x.shape[-1]
    z = (x - x.mean(axis=-1, keepdims=True)) / x.std(axis=-1, ddof=1, keepdims=True)
    i = np.arange(1, n + 1)
    s = np.sum((2 * i - 1) * (log_ndtr(z) + log_ndtr(-z[..., ::-1])), axis=-1)
    return -n - s / n


def monte_carlo_normality(sample, seed=0, n_resamples=9999):
    """Monte Carlo p-value of the Anderson-Darling statistic.

    The null distribution is simulated by drawing ``n_resamples`` samples of
    the same size from the normal fitted to ``sample`` and recomputing the
    statistic (with re-estimated parameters) on each.
    """
    x = _sample(sample)
    n = x.size
    if n < 3:
        raise ApplicabilityError(f"Monte Carlo normality test needs n >= 3, got {n}")
    if np.ptp(x) == 0:
        raise DegenerateSampleError("sample has zero variance")
    observed = anderson_darling(x)[0]
    rng = np.random.default_rng(seed)
    null = np.empty(n_resamples)
    mu, sd = x.mean(), x.std(ddof=1)
    chunk = max(1, 2_000_000 // n)
    for start in range(0, n_resamples, chunk):
        stop = min(n_resamples, start + chunk)
        null[start:stop] = anderson_darling(rng.normal(mu, sd, size=(stop - start, n)))
    return (1.0 + np.count_nonzero(null >= observed)) / (n_resamples + 1.0)


def _paired(a, b):
    a, b = _sample(a, "a"), _sample(b, "b")
    if a.shape != b.shape:
        raise ValidationError(f"paired samples differ in length: {a.size} vs {b.size}")
    return a - b


def paired_t_test(a, b):
    """Two-sided paired t-test on ``d = a - b`` with ``n - 1`` degrees of freedom."""
    d = _paired(a, b)
    n = d.size
    if n < 2:
        raise ApplicabilityError("paired t-test needs at least two pairs")
    sd = d.std(ddof=1)
    if not sd > 0:
        raise DegenerateSampleError("all paired differences are identical")
    t = d.mean() / (sd / math.sqrt(n))
    p = 2.0 * stdtr(n - 1, -abs(t))
    return TestResult(float(t), float(min(1.0, p)))


def _exact_signed_rank_counts(doubled_ranks):
    """Number of sign assignments giving each value of the (doubled) positive rank sum."""
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in doubled_ranks:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:total + 1 - r]
        counts = counts + shifted
    return counts


def wilcoxon_signed_rank(a, b):
    """Two-sided Wilcoxon signed-rank test on ``d = a - b``.

    Zero differences are dropped and tied magnitudes get midranks. The
    statistic is the positive-rank sum W+. With at most 25 nonzero
    differences the p-value comes from the exact distribution over all
    ``2**n`` sign assignments (ties included); beyond that the normal
    approximation with tie-corrected variance and continuity correction
    is used. If every difference is zero the result is ``p = 1`` flagged as
    degenerate.
    """
    d = _paired(a, b)
    d = d[d != 0]
    n = d.size
    if n == 0:
        return TestResult(0.0, 1.0, degenerate=True)
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    if n <= EXACT_WILCOXON_MAX_N:
        doubled = np.rint(2 * ranks).astype(np.int64)
        counts = _exact_signed_rank_counts(doubled)
        total = counts.sum()
        w2 = int(round(2 * w_plus))
        lower = counts[:w2 + 1].sum() / total
        upper = counts[w2:].sum() / total
        p = min(1.0, 2.0 * min(lower, upper))
    else:
        mean = n * (n + 1) / 4.0
        _, tie_counts = np.unique(np.abs(d), return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(tie_counts ** 3 - tie_counts) / 48.0
        z = max(0.0, abs(w_plus - mean) - 0.5) / math.sqrt(var)
        p = min(1.0, 2.0 * _norm_sf(z))
    return TestResult(w_plus, float(p))


def normality_pvalue(sample, seed=0):
    """(test name, p-value) with the sample-size routing used by :func:`significance`."""
    x = _sample(sample)
    if x.size < MC_CUTOFF:
        return "monte_carlo", monte_carlo_normality(x, seed=seed)
    return "dagostino_pearson", dagostino_pearson(x)


def significance(before, after, metric_name="", seed=0, alpha=ALPHA):
    """Compare paired metric samples measured before and after a treatment."""
    d = _paired(before, after)
    n = d.size
    norm_test = "monte_carlo" if n < MC_CUTOFF else "dagostino_pearson"
    if n == 0 or np.all(d == 0):
        return SignificanceResult(metric_name, n, norm_test, math.nan, "wilcoxon", 0.0, 1.0, False,
                                  note="degenerate: all paired differences are zero")
    note = ""
    try:
        norm_test, norm_p = normality_pvalue(d, seed=seed)
    except (ApplicabilityError, DegenerateSampleError) as exc:
        norm_p = math.nan
        note = f"normality not assessable ({exc}); using Wilcoxon"
    if norm_p >= alpha:
        stat, p, _ = paired_t_test(before, after)
        chosen = "paired_t"
    else:
        stat, p, _ = wilcoxon_signed_rank(before, after)
        chosen = "wilcoxon"
    return SignificanceResult(metric_name, n, norm_test, float(norm_p), chosen, float(stat), float(p),
                              bool(p < alpha), note)
