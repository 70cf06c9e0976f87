"""Binary decision trees stored as flat node arrays.

Two growers share the representation:

* ``grow_gini_tree`` builds a classification tree (Gini impurity, leaves hold
  class-probability vectors) for the random forest;
* ``grow_boosting_tree`` builds a regression tree on per-example gradient and
  Hessian values using the second-order split gain; leaves hold a single
  weight ``-G / (H + lambda)``.

A sample goes left when ``x[feature] <= threshold``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LEAF = -1


@dataclass
class Tree:
    feature: np.ndarray  # int, LEAF for leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (n_nodes, n_outputs)
    gain: np.ndarray  # split gain credited to ``feature``; 0 at leaves

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int(np.count_nonzero(self.feature == LEAF))

    @property
    def n_splits(self) -> int:
        return self.n_nodes - self.n_leaves

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of X."""
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        active = self.feature[node] != LEAF
        while active.any():
            r = rows[active]
            n = node[r]
            go_left = X[r, self.feature[n]] <= self.threshold[n]
            node[r] = np.where(go_left, self.left[n], self.right[n])
            active = self.feature[node] != LEAF
        return node

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def feature_gains(self, n_features: int) -> np.ndarray:
        out = np.zeros(n_features)
        internal = self.feature != LEAF
        np.add.at(out, self.feature[internal], self.gain[internal])
        return out

    def depth(self) -> int:
        best = 0
        stack = [(0, 0)]
        while stack:
            node, d = stack.pop()
            best = max(best, d)
            if self.feature[node] != LEAF:
                stack.append((int(self.left[node]), d + 1))
                stack.append((int(self.right[node]), d + 1))
        return best

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "gain": self.gain.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        value = np.asarray(d["value"], dtype=float)
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int64),
            threshold=np.asarray(d["threshold"], dtype=float),
            left=np.asarray(d["left"], dtype=np.int64),
            right=np.asarray(d["right"], dtype=np.int64),
            value=value.reshape(len(d["feature"]), -1),
            gain=np.asarray(d["gain"], dtype=float),
        )


class _Builder:
    def __init__(self) -> None:
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[np.ndarray] = []
        self.gain: list[float] = []

    def add(self, value: np.ndarray) -> int:
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(np.atleast_1d(np.asarray(value, dtype=float)))
        self.gain.append(0.0)
        return len(self.feature) - 1

    def split(self, node: int, feature: int, threshold: float, gain: float, left: int, right: int) -> None:
        self.feature[node] = feature
        self.threshold[node] = threshold
        self.gain[node] = gain
        self.left[node] = left
        self.right[node] = right

    def build(self) -> Tree:
        return Tree(
            feature=np.array(self.feature, dtype=np.int64),
            threshold=np.array(self.threshold, dtype=float),
            left=np.array(self.left, dtype=np.int64),
            right=np.array(self.right, dtype=np.int64),
            value=np.vstack(self.value),
            gain=np.array(self.gain, dtype=float),
        )


def _midpoint(a: float, b: float) -> float:
    t = a + (b - a) / 2.0
    # rounding can land the midpoint on b, which would send b left
    return a if t >= b else t


def _sorted_columns(X: np.ndarray, features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    cols = X[:, features]
    order = np.argsort(cols, axis=0, kind="stable")
    return order, np.take_along_axis(cols, order, axis=0)


# -- Gini classification tree ----------------------------------------------


def gini(counts: np.ndarray) -> np.ndarray:
    """Gini impurity of class-count rows (last axis = classes)."""
    n = counts.sum(axis=-1, keepdims=True)
    p = counts / np.where(n > 0, n, 1)
    return 1.0 - np.sum(p * p, axis=-1)


def _best_gini_split(X, Y, features, min_leaf):
    """Best (feature, threshold, impurity decrease) over ``features``; None if no valid cut."""
    n = len(X)
    parent = gini(Y.sum(axis=0))
    order, xs = _sorted_columns(X, features)
    best = None
    for j, f in enumerate(features):
        left = np.cumsum(Y[order[:, j]], axis=0)[:-1]  # left child = first i+1 rows
        n_left = np.arange(1, n)
        right = left[-1] + Y[order[-1, j]] - left
        valid = (xs[:-1, j] < xs[1:, j]) & (n_left >= min_leaf) & (n - n_left >= min_leaf)
        if not valid.any():
            continue
        weighted = (n_left * gini(left) + (n - n_left) * gini(right)) / n
        weighted = np.where(valid, weighted, np.inf)
        i = int(np.argmin(weighted))
        decrease = parent - weighted[i]
        if best is None or decrease > best[2]:
            best = (int(f), _midpoint(xs[i, j], xs[i + 1, j]), float(decrease))
    return best


def grow_gini_tree(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    *,
    max_depth: int | None = None,
    min_leaf: int = 1,
    max_features: int | None = None,
    rng: np.random.Generator | None = None,
) -> Tree:
    """Greedy CART growth; leaves store class frequencies.

    ``max_features`` features are drawn without replacement at every split.
    Split gains are recorded as ``(n_node / n_root) * impurity_decrease``.
    """
    n_features = X.shape[1]
    k = n_features if max_features is None else min(max_features, n_features)
    if k < n_features and rng is None:
        raise ValueError("feature subsampling needs an rng")
    Y = np.eye(n_classes)[y]
    n_root = len(X)
    b = _Builder()
    root = b.add(Y.mean(axis=0))
    stack = [(root, np.arange(n_root), 0)]
    while stack:
        node, idx, depth = stack.pop()
        counts = Y[idx].sum(axis=0)
        if (
            np.count_nonzero(counts) <= 1
            or (max_depth is not None and depth >= max_depth)
            or len(idx) < 2 * min_leaf
        ):
            continue
        feats = np.arange(n_features) if k == n_features else np.sort(rng.choice(n_features, k, replace=False))
        found = _best_gini_split(X[idx], Y[idx], feats, min_leaf)
        if found is None:
            continue
        f, thr, decrease = found
        go_left = X[idx, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        left = b.add(Y[li].mean(axis=0))
        right = b.add(Y[ri].mean(axis=0))
        b.split(node, f, thr, len(idx) / n_root * decrease, left, right)
        stack.append((right, ri, depth + 1))
        stack.append((left, li, depth + 1))
    return b.build()


# -- second-order regression tree -------------------------------------------


def leaf_weight(G: float, H: float, lam: float) -> float:
    return -G / (H + lam)


def _structure_score(G, H, lam):
    return G * G / (H + lam)


def _best_boost_split(X, g, h, lam):
    features = np.arange(X.shape[1])
    order, xs = _sorted_columns(X, features)
    G, H = g.sum(), h.sum()
    parent = _structure_score(G, H, lam)
    best = None
    for f in features:
        GL = np.cumsum(g[order[:, f]])[:-1]
        HL = np.cumsum(h[order[:, f]])[:-1]
        valid = xs[:-1, f] < xs[1:, f]
        if not valid.any():
            continue
        gain = 0.5 * (_structure_score(GL, HL, lam) + _structure_score(G - GL, H - HL, lam) - parent)
        gain = np.where(valid, gain, -np.inf)
        i = int(np.argmax(gain))
        if best is None or gain[i] > best[2]:
            best = (int(f), _midpoint(xs[i, f], xs[i + 1, f]), float(gain[i]))
    return best


def grow_boosting_tree(
    X: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    *,
    lam: float = 1.0,
    gamma: float = 0.0,
    max_depth: int = 4,
) -> Tree:
    """Exact greedy tree on gradient statistics; a split needs gain > gamma."""
    b = _Builder()
    root = b.add(leaf_weight(g.sum(), h.sum(), lam))
    stack = [(root, np.arange(len(X)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if depth >= max_depth or len(idx) < 2:
            continue
        found = _best_boost_split(X[idx], g[idx], h[idx], lam)
        if found is None or not found[2] > gamma:
            continue
        f, thr, gain = found
        go_left = X[idx, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        left = b.add(leaf_weight(g[li].sum(), h[li].sum(), lam))
        right = b.add(leaf_weight(g[ri].sum(), h[ri].sum(), lam))
        b.split(node, f, thr, gain, left, right)
        stack.append((right, ri, depth + 1))
        stack.append((left, li, depth + 1))
    return b.build()


def candidate_gains(X: np.ndarray, g: np.ndarray, h: np.ndarray, lam: float) -> np.ndarray:
    """Root-level second-order gain of every valid cut on every feature (brute force)."""
    G, H = g.sum(), h.sum()
    gains = []
    for f in range(X.shape[1]):
        values = np.unique(X[:, f])
        for a, c in zip(values[:-1], values[1:]):
            m = X[:, f] <= _midpoint(a, c)
            GL, HL = g[m].sum(), h[m].sum()
            gains.append(
                0.5 * (GL**2 / (HL + lam) + (G - GL) ** 2 / (H - HL + lam) - G**2 / (H + lam))
            )
    return np.array(gains)
