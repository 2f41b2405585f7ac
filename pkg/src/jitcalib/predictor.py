"""Logistic-regression defect predictor driven by commit metrics (by default
only ``la``, the number of added lines)."""

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ._validation import THRESHOLD, check_labels, require_both_classes, sigmoid
from .dataset import LabeledInstance, PredictionSet, feature_matrix
from .exceptions import FitError, ValidationError


@dataclass(frozen=True)
class LogRegModel:
    """Fitted coefficients; ``weights`` apply to standardized features."""

    features: tuple
    weights: dict
    intercept: float
    scaling: dict = field(repr=False)

    def decision_function(self, X):
        X = np.asarray(X, dtype=float)
        mean = np.array([self.scaling[f][0] for f in self.features])
        std = np.array([self.scaling[f][1] for f in self.features])
        w = np.array([self.weights[f] for f in self.features])
        return self.intercept + ((X - mean) / std) @ w

    def to_json(self):
        return json.dumps({
            "features": list(self.features),
            "weights": self.weights,
            "intercept": self.intercept,
            "scaling": {f: list(v) for f, v in self.scaling.items()},
        }, indent=2)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(tuple(d["features"]), dict(d["weights"]), float(d["intercept"]),
                   {f: tuple(v) for f, v in d["scaling"].items()})


class LAPredict(ClassifierMixin, BaseEstimator):
    """L2-penalised logistic regression on standardized features.

    Maximises ``sum(log-likelihood) - l2/2 * ||w||^2`` (intercept not
    penalised) with damped Newton iterations.

    Parameters
    ----------
    features : sequence of str, default=("la",)
        Names of the columns of ``X``, used for error messages and export.
    l2 : float, default=1.0
    max_iter : int, default=100
    tol : float, default=1e-8
        Stop when the max-norm of the per-sample gradient is below ``tol``.
    """

    def __init__(self, features=("la",), l2=1.0, max_iter=100, tol=1e-8):
        self.features = features
        self.l2 = l2
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        y = check_labels(y)
        names = tuple(self.features)
        if X.shape[1] != len(names):
            raise ValidationError(f"X has {X.shape[1]} columns but {len(names)} features are named")
        if self.l2 < 0:
            raise ValidationError("l2 must be nonnegative")
        require_both_classes(y, "training data")
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        for name, s in zip(names, std):
            if not s > 0:
                raise FitError(f"feature {name!r} has zero variance")
        Z = np.column_stack([np.ones(len(y)), (X - mean) / std])
        n, d = Z.shape
        penalty = np.full(d, float(self.l2))
        penalty[0] = 0.0

        def objective(theta):
            z = Z @ theta
            return (np.sum(np.logaddexp(0.0, z) - y * z) + 0.5 * np.sum(penalty * theta ** 2)) / n

        theta = np.zeros(d)
        loss = objective(theta)
        self.converged_ = False
        self.n_iter_ = 0
        for it in range(self.max_iter + 1):
            p = sigmoid(Z @ theta)
            grad = (Z.T @ (p - y) + penalty * theta) / n
            if np.max(np.abs(grad)) < self.tol:
                self.converged_ = True
                break
            if it == self.max_iter:
                break
            H = ((Z * (p * (1 - p))[:, None]).T @ Z + np.diag(penalty)) / n
            step = np.linalg.solve(H + 1e-12 * np.eye(d), grad)
            t = 1.0
            while True:
                cand = theta - t * step
                cand_loss = objective(cand)
                if cand_loss <= loss - 1e-4 * t * (grad @ step) or t < 1e-12:
                    break
                t *= 0.5
            if cand_loss > loss:
                break
            theta, loss = cand, cand_loss
            self.n_iter_ = it + 1
        self.intercept_ = float(theta[0])
        self.coef_ = theta[1:].copy()
        self.mean_, self.scale_ = mean, std
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = d - 1
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValidationError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return self.intercept_ + ((X - self.mean_) / self.scale_) @ self.coef_

    def predict_proba(self, X):
        p = sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= THRESHOLD).astype(np.int64)

    def to_model(self):
        check_is_fitted(self, "coef_")
        names = tuple(self.features)
        return LogRegModel(
            features=names,
            weights={f: float(w) for f, w in zip(names, self.coef_)},
            intercept=self.intercept_,
            scaling={f: (float(m), float(s)) for f, m, s in zip(names, self.mean_, self.scale_)},
        )


def train_logreg(train: Sequence[LabeledInstance], feature_set=("la",), l2=1.0,
                 max_iter=100, tol=1e-8):
    X, y = feature_matrix(train, feature_set)
    est = LAPredict(features=tuple(feature_set), l2=l2, max_iter=max_iter, tol=tol).fit(X, y)
    return est.to_model()


def predict(model: LogRegModel, instances: Sequence[LabeledInstance]):
    X, y = feature_matrix(instances, model.features)
    return PredictionSet.from_logits(model.decision_function(X), y,
                                     ids=[inst.id for inst in instances])
