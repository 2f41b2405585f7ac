"""Post-hoc recalibration: Platt scaling and temperature scaling.

Both calibrators operate on logits ``q`` and are fitted by minimising the mean
negative log-likelihood on a calibration set that is disjoint from the
model's training data::

    platt:        p = sigmoid(alpha * q + beta)
    temperature:  p = sigmoid(q / T),  T > 0
"""

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted, check_consistent_length

from ._validation import EPS, THRESHOLD, check_labels, check_logits, check_scores, logit, \
    require_both_classes, sigmoid
from .dataset import PredictionSet
from .exceptions import UndefinedInputError, ValidationError

T_MIN, T_MAX = 1e-2, 1e2


@dataclass(frozen=True)
class PlattParams:
    alpha: float
    beta: float
    converged: bool
    iterations: int
    final_nll: float

    method = "platt"

    def to_dict(self):
        return {"method": self.method, **asdict(self)}


@dataclass(frozen=True)
class TemperatureParam:
    t: float
    converged: bool
    iterations: int
    final_nll: float

    method = "temperature"

    def to_dict(self):
        return {"method": self.method, **asdict(self)}


def params_to_json(params):
    return json.dumps(params.to_dict(), indent=2, sort_keys=True)


def params_from_json(text):
    d = json.loads(text)
    method = d.pop("method", None)
    if method == "platt":
        return PlattParams(**d)
    if method == "temperature":
        return TemperatureParam(**d)
    raise ValidationError(f"unknown calibration method {method!r}")


def nll(y_true, y_prob):
    """Mean negative log-likelihood with probabilities clamped to [1e-12, 1 - 1e-12]."""
    y, p = check_scores(y_true, y_prob)
    p = np.clip(p, EPS, 1.0 - EPS)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log1p(-p)))


def _logistic_loss(z, y):
    # mean of log(1 + e^z) - y z, exact for any z
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def _unpack(cal, y_true):
    if isinstance(cal, PredictionSet):
        if y_true is not None:
            raise TypeError("pass either a PredictionSet or (logits, y_true), not both")
        q, y = cal.logit, cal.true_label
    else:
        if y_true is None:
            raise TypeError("y_true is required when logits are passed as an array")
        q, y = check_logits(cal), check_labels(y_true)
        check_consistent_length(q, y)
    if q.size == 0:
        raise UndefinedInputError("empty calibration set")
    require_both_classes(y, "calibration set")
    return np.asarray(q, dtype=float), np.asarray(y, dtype=float)


def fit_platt(cal, y_true=None, *, max_iter=200, tol=1e-8):
    """Fit ``(alpha, beta)`` by damped Newton from the identity ``(1, 0)``.

    ``cal`` is a :class:`PredictionSet` or an array of logits (then
    ``y_true`` is required). Stops when the gradient's max-norm drops below
    ``tol``; ``converged`` is False if ``max_iter`` is reached first.
    """
    q, y = _unpack(cal, y_true)
    X = np.column_stack([q, np.ones_like(q)])
    theta = np.array([1.0, 0.0])
    loss = _logistic_loss(X @ theta, y)
    converged = False
    it = 0
    while True:
        p = sigmoid(X @ theta)
        grad = X.T @ (p - y) / y.size
        if np.max(np.abs(grad)) < tol:
            converged = True
            break
        if it >= max_iter:
            break
        it += 1
        w = p * (1.0 - p)
        H = (X * w[:, None]).T @ X / y.size
        try:
            step = np.linalg.solve(H + 1e-12 * np.eye(2), grad)
        except np.linalg.LinAlgError:
            step = grad
        if not np.all(np.isfinite(step)) or grad @ step <= 0:
            step = grad
        t = 1.0
        while True:
            cand = theta - t * step
            cand_loss = _logistic_loss(X @ cand, y)
            if cand_loss <= loss - 1e-4 * t * (grad @ step) or t < 1e-12:
                break
            t *= 0.5
        if cand_loss > loss:
            # no descent possible at machine precision
            break
        theta, loss = cand, cand_loss
    alpha, beta = map(float, theta)
    return PlattParams(alpha, beta, converged, it, nll(y, sigmoid(alpha * q + beta)))


def _temperature_derivatives(s, q, y):
    z = q * math.exp(-s)
    r = sigmoid(z) - y
    w = sigmoid(z) * (1.0 - sigmoid(z))
    g = float(np.mean(-r * z))
    h = float(np.mean(w * z * z + r * z))
    return g, h


def fit_temperature(cal, y_true=None, *, max_iter=100, tol=1e-10):
    """Fit ``T`` in ``[0.01, 100]`` by safeguarded Newton on ``log T``, starting at ``T = 1``.

    The derivative of the mean NLL in ``log T`` is nondecreasing, so the
    search keeps a sign bracket and bisects whenever a Newton step leaves it.
    Hitting either bound reports ``converged=False``.
    """
    q, y = _unpack(cal, y_true)
    lo, hi = math.log(T_MIN), math.log(T_MAX)

    def done(s, converged, it):
        t = math.exp(s)
        return TemperatureParam(t, converged, it, nll(y, sigmoid(q / t)))

    g_lo, _ = _temperature_derivatives(lo, q, y)
    if g_lo >= 0:
        return done(lo, abs(g_lo) < tol, 0)
    g_hi, _ = _temperature_derivatives(hi, q, y)
    if g_hi <= 0:
        return done(hi, abs(g_hi) < tol, 0)

    s = 0.0
    for it in range(max_iter + 1):
        g, h = _temperature_derivatives(s, q, y)
        if abs(g) < tol:
            return done(s, True, it)
        if it == max_iter:
            break
        if g > 0:
            hi = s
        else:
            lo = s
        nxt = s - g / h if h > 0 else None
        if nxt is None or not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if nxt == s:
            break
        s = nxt
    return done(s, False, max_iter)


def _apply(predictions, logits):
    if isinstance(predictions, PredictionSet):
        return predictions.with_logits(logits)
    return sigmoid(logits)


def apply_platt(params, predictions):
    """Recalibrate a :class:`PredictionSet` (or raw logits -> probabilities)."""
    q = predictions.logit if isinstance(predictions, PredictionSet) else check_logits(predictions)
    return _apply(predictions, params.alpha * q + params.beta)


def apply_temperature(param, predictions):
    q = predictions.logit if isinstance(predictions, PredictionSet) else check_logits(predictions)
    return _apply(predictions, q / param.t)


def apply_params(params, predictions):
    if isinstance(params, PlattParams):
        return apply_platt(params, predictions)
    return apply_temperature(params, predictions)


def fit_calibrator(method, cal, y_true=None):
    if method == "platt":
        return fit_platt(cal, y_true)
    if method == "temperature":
        return fit_temperature(cal, y_true)
    raise ValidationError(f"unknown calibration method {method!r}")


class _ScalingBase(TransformerMixin, BaseEstimator):
    def _logits(self, X):
        if self.input == "logit":
            return check_logits(X)
        if self.input == "prob":
            return logit(check_logits(X, name="probabilities"))
        raise ValidationError(f"input must be 'logit' or 'prob', got {self.input!r}")

    def fit(self, X, y):
        self.params_ = self._fit(self._logits(X), y)
        return self

    def transform(self, X):
        """Calibrated probabilities of the positive class, shape (n,)."""
        check_is_fitted(self, "params_")
        return apply_params(self.params_, self._logits(X))

    def predict_proba(self, X):
        p = self.transform(X)
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.transform(X) >= THRESHOLD).astype(np.int64)


class PlattScaling(_ScalingBase):
    """Platt scaling estimator.

    ``fit(X, y)`` takes logits (or probabilities with ``input="prob"``) and
    binary labels; ``transform`` returns calibrated probabilities.
    """

    def __init__(self, input="logit", max_iter=200, tol=1e-8):
        self.input = input
        self.max_iter = max_iter
        self.tol = tol

    def _fit(self, q, y):
        params = fit_platt(q, y, max_iter=self.max_iter, tol=self.tol)
        self.alpha_, self.beta_ = params.alpha, params.beta
        return params


class TemperatureScaling(_ScalingBase):
    """Temperature scaling estimator; ``temperature_`` holds the fitted T."""

    def __init__(self, input="logit", max_iter=100, tol=1e-10):
        self.input = input
        self.max_iter = max_iter
        self.tol = tol

    def _fit(self, q, y):
        params = fit_temperature(q, y, max_iter=self.max_iter, tol=self.tol)
        self.temperature_ = params.t
        return params
