"""Random forest of Gini trees with soft-vote (probability-averaging) aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .. import N_CLASSES, N_FEATURES
from .contract import Classifier, as_matrix
from .tree import Tree, grow_gini_tree


@dataclass(frozen=True)
class ForestHyper:
    n_trees: int = 100
    max_depth: int | None = 8
    min_leaf: int = 2
    features_per_split: int = math.ceil(math.sqrt(N_FEATURES))
    bootstrap: bool = True
    seed: int = 0


class RandomForestModel(Classifier):
    kind = "rf"

    def __init__(self, trees: Sequence[Tree], tree_seeds: Sequence[int], hyper: ForestHyper):
        if not trees:
            raise ValueError("a forest needs at least one tree")
        self.trees = list(trees)
        self.tree_seeds = [int(s) for s in tree_seeds]
        self.hyper = hyper

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def predict_proba(self, X) -> np.ndarray:
        X = as_matrix(X)
        return rf_aggregate([t.predict_value(X) for t in self.trees])

    def native_importance(self) -> np.ndarray | None:
        total = sum(t.feature_gains(N_FEATURES) for t in self.trees)
        return total if np.sum(total) > 0 else None

    def hyper_dict(self) -> dict:
        h = self.hyper
        return {
            "n_trees": h.n_trees,
            "max_depth": h.max_depth,
            "min_leaf": h.min_leaf,
            "features_per_split": h.features_per_split,
            "bootstrap": h.bootstrap,
            "seed": h.seed,
        }

    def params_dict(self) -> dict:
        return {"tree_seeds": self.tree_seeds, "trees": [t.to_dict() for t in self.trees]}


def rf_aggregate(per_tree: Sequence[np.ndarray]) -> np.ndarray:
    """Arithmetic mean of per-tree probability outputs."""
    return np.mean(np.stack(per_tree), axis=0)


def rf_train(X, y, hyper: ForestHyper = ForestHyper()) -> RandomForestModel:
    X = as_matrix(X)
    y = np.asarray(y, dtype=np.int64)
    if len(X) == 0:
        raise ValueError("empty training set")
    seeds = np.random.SeedSequence(hyper.seed).generate_state(hyper.n_trees, dtype=np.uint32)
    trees = []
    for s in seeds:
        rng = np.random.default_rng(int(s))
        idx = rng.integers(0, len(X), len(X)) if hyper.bootstrap else np.arange(len(X))
        trees.append(
            grow_gini_tree(
                X[idx],
                y[idx],
                N_CLASSES,
                max_depth=hyper.max_depth,
                min_leaf=hyper.min_leaf,
                max_features=hyper.features_per_split,
                rng=rng,
            )
        )
    return RandomForestModel(trees, seeds.tolist(), hyper)
