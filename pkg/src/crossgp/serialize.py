"""model.json reading and writing.

Layout (``schema_version`` 1)::

    {
      "schema_version": 1,
      "kind": "lr" | "rf" | "gbt" | "crossgp",
      "feature_names": [...7 names...],
      "class_names": ["Good", "Moderate", "Poor"],
      "hyperparameters": {...},
      "normalization": {"mean": [...], "std": [...]},
      "params": {...kind-specific...},
      "training": {...split / augmentation / seed provenance...}
    }

Kind-specific ``params``:

* lr: ``weights`` (3x7), ``intercepts`` (3)
* rf: ``tree_seeds``, ``trees`` (flat node arrays, see ``Tree.to_dict``)
* gbt: ``base_score`` (3), ``rounds`` (K lists of 3 trees)
* crossgp: ``params`` (named layer tensors), ``buffers`` (BatchNorm running stats)

Floats are written with ``repr`` precision, so a round trip is exact.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from . import CLASS_NAMES, FEATURE_NAMES
from .baselines import (
    BoostedModel,
    BoostingHyper,
    Classifier,
    ForestHyper,
    LogisticHyper,
    LogisticModel,
    RandomForestModel,
    Tree,
)
from .errors import CrossGPError
from .net import CrossGPModel, CrossGPNet, TrainConfig

SCHEMA_VERSION = 1
MODEL_KINDS = ("lr", "rf", "gbt", "crossgp")


def model_to_dict(model: Classifier, mean=None, std=None, training: dict | None = None) -> dict:
    mean = getattr(model, "mean", None) if mean is None else mean
    std = getattr(model, "std", None) if std is None else std
    d: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "kind": model.kind,
        "feature_names": list(FEATURE_NAMES),
        "class_names": list(CLASS_NAMES),
        "hyperparameters": model.hyper_dict(),
        "normalization": None
        if mean is None
        else {"mean": np.asarray(mean, float).tolist(), "std": np.asarray(std, float).tolist()},
        "params": model.params_dict(),
        "training": training or {},
    }
    return d


def model_from_dict(d: dict) -> Classifier:
    if d.get("schema_version") != SCHEMA_VERSION:
        raise CrossGPError(f"unsupported model schema_version {d.get('schema_version')!r}")
    kind = d.get("kind")
    hp, params, norm = d["hyperparameters"], d["params"], d.get("normalization") or {}
    if kind == "lr":
        return LogisticModel(
            params["weights"], params["intercepts"], norm.get("mean"), norm.get("std"), LogisticHyper(**hp)
        )
    if kind == "rf":
        return RandomForestModel(
            [Tree.from_dict(t) for t in params["trees"]], params["tree_seeds"], ForestHyper(**hp)
        )
    if kind == "gbt":
        hyper = BoostingHyper(
            n_rounds=hp["n_rounds"],
            learning_rate=hp["learning_rate"],
            lam=hp["lambda"],
            gamma=hp["gamma"],
            max_depth=hp["max_depth"],
            seed=hp["seed"],
        )
        rounds = [[Tree.from_dict(t) for t in trees] for trees in params["rounds"]]
        return BoostedModel(params["base_score"], rounds, hyper)
    if kind == "crossgp":
        config = TrainConfig(**hp)
        net = CrossGPNet(config.hidden, seed=config.seed, bn_momentum=config.bn_momentum)
        net.load_state(params)
        return CrossGPModel(net, norm["mean"], norm["std"], config)
    raise CrossGPError(f"unknown model kind {kind!r}; expected one of {', '.join(MODEL_KINDS)}")


def dumps(obj: dict) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n"


def save_model(model: Classifier, path: str | Path, **kwargs) -> dict:
    d = model_to_dict(model, **kwargs)
    Path(path).write_text(dumps(d), encoding="utf-8")
    return d


def load_model_dict(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def load_model(path: str | Path) -> Classifier:
    return model_from_dict(load_model_dict(path))
