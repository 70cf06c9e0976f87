"""Multinomial logistic regression fit by full-batch gradient descent.

The binary logistic model ``1 / (1 + exp(-(b0 + b1 x)))`` is the two-class
special case of the softmax model used here: with logits ``(b0 + b1 x, 0)``
the first class probability is exactly the logistic function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import N_CLASSES, N_FEATURES
from ..errors import DomainError, NonFinite
from .contract import Classifier, Standardized, as_matrix, log_softmax, softmax


@dataclass(frozen=True)
class LogisticHyper:
    step_size: float = 0.1
    epochs: int = 2000
    l2: float = 1e-4
    checkpoint_every: int = 100


def penalized_nll(W: np.ndarray, b: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float) -> float:
    """Mean negative log-likelihood plus ``l2/2 * ||W||^2`` (intercepts unpenalized)."""
    logp = log_softmax(X @ W.T + b)
    return float(-logp[np.arange(len(y)), y].mean() + 0.5 * l2 * np.sum(W * W))


def penalized_nll_grad(
    W: np.ndarray, b: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float
) -> tuple[np.ndarray, np.ndarray]:
    P = softmax(X @ W.T + b)
    P[np.arange(len(y)), y] -= 1.0
    P /= len(y)
    return P.T @ X + l2 * W, P.sum(axis=0)


class LogisticModel(Classifier, Standardized):
    kind = "lr"

    def __init__(self, weights, intercepts, mean=None, std=None, hyper: LogisticHyper | None = None):
        self.weights = np.asarray(weights, dtype=float).reshape(N_CLASSES, N_FEATURES)
        self.intercepts = np.asarray(intercepts, dtype=float).reshape(N_CLASSES)
        self.mean = np.zeros(N_FEATURES) if mean is None else np.asarray(mean, dtype=float)
        self.std = np.ones(N_FEATURES) if std is None else np.asarray(std, dtype=float)
        self.hyper = hyper or LogisticHyper()
        self.history: list[float] = []

    def decision_function(self, X) -> np.ndarray:
        return self.normalize(as_matrix(X)) @ self.weights.T + self.intercepts

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.decision_function(X))

    def native_importance(self) -> np.ndarray:
        return np.abs(self.weights).mean(axis=0)

    def hyper_dict(self) -> dict:
        return {k: getattr(self.hyper, k) for k in ("step_size", "epochs", "l2", "checkpoint_every")}

    def params_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "intercepts": self.intercepts.tolist()}


def lr_train(
    X: np.ndarray,
    y: np.ndarray,
    hyper: LogisticHyper = LogisticHyper(),
    mean: np.ndarray | None = None,
    std: np.ndarray | None = None,
) -> LogisticModel:
    """Fit on raw features; ``mean``/``std`` (train statistics) define the normalization.

    ``model.history`` holds the penalized mean log-likelihood at every
    checkpoint (and at the final epoch).
    """
    X = as_matrix(X)
    y = np.asarray(y, dtype=np.int64)
    if len(np.unique(y)) < 2:
        raise DomainError("logistic regression needs at least two classes in train")
    model = LogisticModel(np.zeros((N_CLASSES, N_FEATURES)), np.zeros(N_CLASSES), mean, std, hyper)
    Xn = model.normalize(X)
    W, b = model.weights, model.intercepts
    for epoch in range(hyper.epochs):
        if epoch % hyper.checkpoint_every == 0:
            model.history.append(-penalized_nll(W, b, Xn, y, hyper.l2))
        gW, gb = penalized_nll_grad(W, b, Xn, y, hyper.l2)
        W -= hyper.step_size * gW
        b -= hyper.step_size * gb
        if not (np.isfinite(W).all() and np.isfinite(b).all()):
            raise NonFinite("epoch", epoch)
    model.history.append(-penalized_nll(W, b, Xn, y, hyper.l2))
    return model
