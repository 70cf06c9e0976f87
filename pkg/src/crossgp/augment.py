"""Gaussian noise augmentation of training examples."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import N_FEATURES
from .errors import ConfigError
from .featurize import LabeledExample, to_arrays

RANGE_COLS = slice(0, 3)  # tir, tbr, tar
AMOUNT_COLS = slice(3, N_FEATURES)


@dataclass(frozen=True)
class AugmentConfig:
    sigma_scale: float = 0.05
    copies_per_example: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.sigma_scale >= 0:
            raise ConfigError(f"sigma_scale must be >= 0, got {self.sigma_scale}")
        if self.copies_per_example < 0:
            raise ConfigError(f"copies_per_example must be >= 0, got {self.copies_per_example}")


def draw_noise(std: np.ndarray, cfg: AugmentConfig, n_rows: int) -> np.ndarray:
    """Noise matrix of shape (copies * n_rows, 7), copy-major.

    Column j has standard deviation ``sigma_scale * std[j]``.
    """
    rng = np.random.default_rng(cfg.seed)
    z = rng.standard_normal((cfg.copies_per_example * n_rows, N_FEATURES))
    return z * (cfg.sigma_scale * np.asarray(std, dtype=float))


def project_features(X: np.ndarray) -> np.ndarray:
    """Restore feature invariants on perturbed rows.

    The range triple is clamped to [0, 1] and rescaled to sum to one;
    insulin and carbohydrate totals are clamped at zero.
    """
    X = X.copy()
    tri = np.clip(X[:, RANGE_COLS], 0.0, 1.0)
    total = tri.sum(axis=1, keepdims=True)
    # all three clamped to zero cannot be renormalized; fall back to uniform
    tri = np.where(total > 0, tri / np.where(total > 0, total, 1.0), 1.0 / 3.0)
    X[:, RANGE_COLS] = tri
    X[:, AMOUNT_COLS] = np.maximum(X[:, AMOUNT_COLS], 0.0)
    return X


def augment(
    train: Sequence[LabeledExample], std: np.ndarray, cfg: AugmentConfig
) -> list[LabeledExample]:
    """Originals followed by ``copies_per_example`` perturbed blocks of the whole set.

    Labels, subjects and dates are copied unchanged.
    """
    out = list(train)
    if cfg.copies_per_example == 0 or not train:
        return out
    X, _ = to_arrays(train)
    noise = draw_noise(std, cfg, len(train))
    tiled = np.tile(X, (cfg.copies_per_example, 1))
    if cfg.sigma_scale == 0:
        perturbed = tiled
    else:
        perturbed = project_features(tiled + noise)
    n = len(train)
    for k, row in enumerate(perturbed):
        src = train[k % n]
        out.append(LabeledExample(src.features.with_vector(row), src.label, src.label_date))
    return out
