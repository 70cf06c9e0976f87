"""From-scratch comparison models: logistic regression, random forest, boosted trees."""

import numpy as np

from .. import N_FEATURES
from .boosting import BoostedModel, BoostingHyper, gbt_train
from .contract import Classifier
from .forest import ForestHyper, RandomForestModel, rf_aggregate, rf_train
from .logistic import LogisticHyper, LogisticModel, lr_train
from .tree import Tree

__all__ = [
    "BoostedModel",
    "BoostingHyper",
    "Classifier",
    "ForestHyper",
    "LogisticHyper",
    "LogisticModel",
    "RandomForestModel",
    "Tree",
    "gbt_train",
    "lr_train",
    "rf_aggregate",
    "rf_train",
    "tree_importance",
]


def tree_importance(model):
    """Normalized per-feature split-gain totals and an availability flag.

    Returns ``(scores, available)``; a model without any split yields a
    uniform vector with ``available=False``.
    """
    raw = model.native_importance()
    if raw is None:
        return np.full(N_FEATURES, 1.0 / N_FEATURES), False
    return raw / raw.sum(), True
