"""Uniform classifier surface shared by every model kind."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .. import N_FEATURES
from ..errors import ShapeError


def as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != N_FEATURES:
        raise ShapeError(f"expected (n, {N_FEATURES}) features, got shape {X.shape}")
    return X


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(z: np.ndarray) -> np.ndarray:
    m = z.max(axis=-1, keepdims=True)
    return z - m - np.log(np.exp(z - m).sum(axis=-1, keepdims=True))


class Classifier:
    """Base class: subclasses implement ``predict_proba`` on raw features.

    ``predict`` is the argmax of the probabilities; ``np.argmax`` returns the
    first maximum, so ties go to the lowest class code.
    """

    kind: str = ""

    def predict_proba(self, X) -> np.ndarray:
        raise NotImplementedError

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def native_importance(self) -> Optional[np.ndarray]:
        """Non-negative per-feature importances, or None when unavailable."""
        return None

    def params_dict(self) -> dict:
        raise NotImplementedError

    def hyper_dict(self) -> dict:
        raise NotImplementedError


class Standardized:
    """Holds train-set z-score statistics for models fit on normalized inputs."""

    mean: np.ndarray
    std: np.ndarray

    def normalize(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.std
