"""Second-order gradient boosting with softmax cross-entropy.

Each round fits one regression tree per class to the gradients
``g = p - onehot(y)`` and diagonal Hessians ``h = p (1 - p)`` of the current
margins, then adds ``learning_rate * tree`` to the margins.

The tracked training objective is

    sum_i CE(y_i, margins_i) + sum_k Omega(f_k),
    Omega(f) = gamma * T + 0.5 * lambda * ||w_eff||^2

where ``w_eff`` are the leaf values actually added to the margins
(``learning_rate`` times the fitted leaf weights) and T is the leaf count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .. import N_CLASSES, N_FEATURES
from ..errors import ConfigError, NonFinite
from .contract import Classifier, as_matrix, log_softmax, softmax
from .tree import Tree, grow_boosting_tree


@dataclass(frozen=True)
class BoostingHyper:
    n_rounds: int = 100
    learning_rate: float = 0.1
    lam: float = 1.0
    gamma: float = 0.0
    max_depth: int = 4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_rounds < 1:
            raise ConfigError("n_rounds must be >= 1")
        if not 0.0 <= self.learning_rate <= 1.0:
            raise ConfigError("learning_rate must lie in [0, 1]")
        if self.lam < 0 or self.gamma < 0:
            raise ConfigError("lambda and gamma must be non-negative")


def prior_logits(y: np.ndarray) -> np.ndarray:
    """Log class frequencies with add-one smoothing (finite for absent classes)."""
    counts = np.bincount(y, minlength=N_CLASSES).astype(float)
    return np.log((counts + 1.0) / (counts.sum() + N_CLASSES))


def tree_penalty(tree: Tree, learning_rate: float, lam: float, gamma: float) -> float:
    leaves = tree.value[tree.feature == -1, 0] * learning_rate
    return gamma * len(leaves) + 0.5 * lam * float(np.sum(leaves * leaves))


def cross_entropy_sum(margins: np.ndarray, y: np.ndarray) -> float:
    return float(-log_softmax(margins)[np.arange(len(y)), y].sum())


class BoostedModel(Classifier):
    kind = "gbt"

    def __init__(self, base_score, rounds: Sequence[Sequence[Tree]], hyper: BoostingHyper):
        self.base_score = np.asarray(base_score, dtype=float).reshape(N_CLASSES)
        self.rounds = [list(r) for r in rounds]
        self.hyper = hyper
        self.objective_history: list[float] = []

    def margins(self, X) -> np.ndarray:
        X = as_matrix(X)
        F = np.tile(self.base_score, (len(X), 1))
        for trees in self.rounds:
            for c, tree in enumerate(trees):
                F[:, c] += self.hyper.learning_rate * tree.predict_value(X)[:, 0]
        return F

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.margins(X))

    def native_importance(self) -> np.ndarray | None:
        total = np.zeros(N_FEATURES)
        for trees in self.rounds:
            for t in trees:
                total += t.feature_gains(N_FEATURES)
        return total if total.sum() > 0 else None

    def hyper_dict(self) -> dict:
        h = self.hyper
        return {
            "n_rounds": h.n_rounds,
            "learning_rate": h.learning_rate,
            "lambda": h.lam,
            "gamma": h.gamma,
            "max_depth": h.max_depth,
            "seed": h.seed,
        }

    def params_dict(self) -> dict:
        return {
            "base_score": self.base_score.tolist(),
            "rounds": [[t.to_dict() for t in trees] for trees in self.rounds],
        }


def gbt_train(X, y, hyper: BoostingHyper = BoostingHyper()) -> BoostedModel:
    """Fit ``hyper.n_rounds`` rounds; ``model.objective_history`` has K + 1 entries."""
    X = as_matrix(X)
    y = np.asarray(y, dtype=np.int64)
    if len(X) == 0:
        raise ValueError("empty training set")
    onehot = np.eye(N_CLASSES)[y]
    base = prior_logits(y)
    model = BoostedModel(base, [], hyper)
    F = np.tile(base, (len(X), 1))
    penalty = 0.0
    model.objective_history.append(cross_entropy_sum(F, y))
    for k in range(hyper.n_rounds):
        P = softmax(F)
        G = P - onehot
        Hs = P * (1.0 - P)
        trees = []
        for c in range(N_CLASSES):
            tree = grow_boosting_tree(
                X, G[:, c], Hs[:, c], lam=hyper.lam, gamma=hyper.gamma, max_depth=hyper.max_depth
            )
            trees.append(tree)
            penalty += tree_penalty(tree, hyper.learning_rate, hyper.lam, hyper.gamma)
        for c, tree in enumerate(trees):
            F[:, c] += hyper.learning_rate * tree.predict_value(X)[:, 0]
        if not np.isfinite(F).all():
            raise NonFinite("round", k)
        model.rounds.append(trees)
        model.objective_history.append(cross_entropy_sum(F, y) + penalty)
    return model
