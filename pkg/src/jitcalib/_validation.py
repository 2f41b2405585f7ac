"""Input validation helpers shared by the estimators and metric functions."""

import numpy as np
from scipy.special import expit
from sklearn.utils.validation import check_array, check_consistent_length

from .exceptions import FitError, UndefinedInputError, ValidationError

EPS = 1e-12
THRESHOLD = 0.5


def sigmoid(x):
    return expit(np.asarray(x, dtype=float))


def logit(p, eps=EPS):
    """Log-odds of ``p`` with ``p`` clamped to ``[eps, 1 - eps]``."""
    p = np.clip(np.asarray(p, dtype=float), eps, 1.0 - eps)
    return np.log(p / (1.0 - p))


def check_probs(y_prob, name="y_prob"):
    p = check_array(y_prob, ensure_2d=False, ensure_min_samples=0, dtype=float, input_name=name)
    if p.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional, got shape {p.shape}")
    if p.size and (p.min() < 0.0 or p.max() > 1.0):
        raise ValidationError(f"{name} must lie in [0, 1]")
    return p


def check_labels(y_true, name="y_true"):
    y = check_array(y_true, ensure_2d=False, ensure_min_samples=0, dtype=None, input_name=name)
    if y.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional, got shape {y.shape}")
    y = y.astype(float)
    if y.size and not np.all((y == 0) | (y == 1)):
        raise ValidationError(f"{name} must contain only 0 and 1")
    return y.astype(np.int64)


def check_scores(y_true, y_prob, *, allow_empty=False):
    """Validate a (labels, probabilities) pair and return them as arrays."""
    y = check_labels(y_true)
    p = check_probs(y_prob)
    check_consistent_length(y, p)
    if not allow_empty and y.size == 0:
        raise UndefinedInputError("no predictions supplied")
    return y, p


def check_logits(x, name="logits"):
    """Accept shape (n,) or (n, 1) logits; return a flat float array."""
    q = check_array(x, ensure_2d=False, dtype=float, input_name=name)
    if q.ndim == 2:
        if q.shape[1] != 1:
            raise ValidationError(f"{name} must have a single column, got {q.shape[1]}")
        q = q[:, 0]
    return q


def require_both_classes(y, what="data"):
    if y.size == 0 or y.min() == y.max():
        raise FitError(f"{what} contains a single class; both 0 and 1 labels are required")
