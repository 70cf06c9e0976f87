"""Dual-branch attention network trained with hand-written backpropagation.

Wiring (H = hidden width, every Dense in a branch is followed by BatchNorm
and ReLU)::

    x (7) -> Dense(7, H) -> ReLU -> h0
    h0 -> [Dense -> BN -> ReLU] x 4 -> h_deep
    h0 -> [Dense -> BN -> ReLU] x 2 -> h_shallow
    s_b = v . tanh(P_b h_b)            b in {deep, shallow}
    (a_deep, a_shallow) = softmax(s_deep, s_shallow)
    f = a_deep * h_deep + a_shallow * h_shallow
    logits = Dense(H, 3)(f)

All parameters live in one flat float64 vector; ``params`` maps names to
views into it, so the optimizer updates a single array.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import N_CLASSES, N_FEATURES
from .baselines.contract import Classifier, Standardized, as_matrix, log_softmax, softmax
from .errors import ConfigError, NonFinite, ShapeError, Unsupported

DEEP_LAYERS = 4
SHALLOW_LAYERS = 2
BRANCHES = (("deep", DEEP_LAYERS), ("shallow", SHALLOW_LAYERS))


def parameter_count(hidden: int, n_in: int = N_FEATURES, n_out: int = N_CLASSES) -> int:
    """Closed form: input Dense + branch Dense/BN layers + attention + output Dense.

    For 7 inputs and 3 classes this is ``8 H^2 + 30 H + 3``.
    """
    branch_layers = DEEP_LAYERS + SHALLOW_LAYERS
    return (
        (n_in + 1) * hidden
        + branch_layers * (hidden * hidden + 3 * hidden)
        + 2 * hidden * hidden
        + hidden
        + (hidden + 1) * n_out
    )


def _layout(hidden: int, n_in: int, n_out: int) -> list[tuple[str, tuple[int, ...]]]:
    H = hidden
    layout: list[tuple[str, tuple[int, ...]]] = [("in.W", (H, n_in)), ("in.b", (H,))]
    for branch, depth in BRANCHES:
        for i in range(depth):
            p = f"{branch}{i}"
            layout += [(f"{p}.W", (H, H)), (f"{p}.b", (H,)), (f"{p}.gamma", (H,)), (f"{p}.beta", (H,))]
    layout += [("att.v", (H,)), ("att.P_deep", (H, H)), ("att.P_shallow", (H, H))]
    layout += [("out.W", (n_out, H)), ("out.b", (n_out,))]
    return layout


def cross_entropy(logits: np.ndarray, y: np.ndarray, weights: Optional[np.ndarray] = None) -> float:
    """Mean (optionally class-weighted) softmax cross-entropy via log-sum-exp."""
    nll = -log_softmax(logits)[np.arange(len(y)), y]
    if weights is None:
        return float(nll.mean())
    w = weights[y]
    return float(np.sum(w * nll) / np.sum(w))


def cross_entropy_grad(logits: np.ndarray, y: np.ndarray, weights: Optional[np.ndarray] = None) -> np.ndarray:
    d = softmax(logits)
    d[np.arange(len(y)), y] -= 1.0
    if weights is None:
        return d / len(y)
    w = weights[y]
    return d * (w / np.sum(w))[:, None]


class CrossGPNet:
    def __init__(
        self,
        hidden: int = 64,
        *,
        seed: int = 0,
        bn_momentum: float = 0.9,
        bn_eps: float = 1e-5,
        n_in: int = N_FEATURES,
        n_out: int = N_CLASSES,
    ) -> None:
        if not 0.0 < bn_momentum < 1.0:
            raise ConfigError("bn_momentum must lie in (0, 1)")
        if bn_eps <= 0:
            raise ConfigError("bn_eps must be positive")
        self.hidden = hidden
        self.n_in = n_in
        self.n_out = n_out
        self.bn_momentum = bn_momentum
        self.bn_eps = bn_eps
        self.layout = _layout(hidden, n_in, n_out)
        self.flat = np.zeros(sum(math.prod(s) for _, s in self.layout))
        self.params = self._views(self.flat)
        self.buffers: dict[str, np.ndarray] = {}
        for branch, depth in BRANCHES:
            for i in range(depth):
                self.buffers[f"{branch}{i}.running_mean"] = np.zeros(hidden)
                self.buffers[f"{branch}{i}.running_var"] = np.ones(hidden)
        self._init(np.random.default_rng([seed, 0]))

    def _views(self, flat: np.ndarray) -> dict[str, np.ndarray]:
        views, start = {}, 0
        for name, shape in self.layout:
            size = math.prod(shape)
            views[name] = flat[start : start + size].reshape(shape)
            start += size
        return views

    def _init(self, rng: np.random.Generator) -> None:
        for name, shape in self.layout:
            p = self.params[name]
            if name.endswith(".gamma"):
                p[...] = 1.0
            elif name.startswith("att."):
                p[...] = rng.uniform(-0.1, 0.1, shape)
            elif name.endswith(".W"):
                bound = math.sqrt(6.0 / shape[1])
                p[...] = rng.uniform(-bound, bound, shape)
            # biases and BN shifts stay zero

    @property
    def n_params(self) -> int:
        return self.flat.size

    def zeros_like_params(self) -> tuple[np.ndarray, dict[str, np.ndarray]]:
        g = np.zeros_like(self.flat)
        return g, self._views(g)

    # -- forward -----------------------------------------------------------

    def forward(self, X: np.ndarray, train: bool, update_stats: bool = True):
        """Return ``(logits, cache)``.

        In train mode BatchNorm normalizes with batch statistics and, when
        ``update_stats`` is set, folds them into the running statistics.
        Infer mode uses the running statistics only, so each row's output
        does not depend on the rest of the batch.
        """
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_in:
            raise ShapeError(f"expected (B, {self.n_in}) input, got {X.shape}")
        if train and len(X) < 2:
            raise ShapeError("train-mode forward needs a batch of at least 2")
        P = self.params
        cache: dict = {"X": X}
        a0 = X @ P["in.W"].T + P["in.b"]
        h0 = np.maximum(a0, 0.0)
        cache["a0"], cache["h0"] = a0, h0
        outs = {}
        for branch, depth in BRANCHES:
            h = h0
            layers = []
            for i in range(depth):
                name = f"{branch}{i}"
                z = h @ P[f"{name}.W"].T + P[f"{name}.b"]
                if train:
                    mu = z.mean(axis=0)
                    var = z.var(axis=0)
                    if update_stats:
                        m = self.bn_momentum
                        rm, rv = self.buffers[f"{name}.running_mean"], self.buffers[f"{name}.running_var"]
                        rm *= m
                        rm += (1.0 - m) * mu
                        rv *= m
                        rv += (1.0 - m) * var
                else:
                    mu = self.buffers[f"{name}.running_mean"]
                    var = self.buffers[f"{name}.running_var"]
                inv_std = 1.0 / np.sqrt(var + self.bn_eps)
                xhat = (z - mu) * inv_std
                y = P[f"{name}.gamma"] * xhat + P[f"{name}.beta"]
                layers.append((h, xhat, inv_std, y))
                h = np.maximum(y, 0.0)
            cache[branch] = layers
            outs[branch] = h
        h_d, h_s = outs["deep"], outs["shallow"]
        u_d = np.tanh(h_d @ P["att.P_deep"].T)
        u_s = np.tanh(h_s @ P["att.P_shallow"].T)
        scores = np.stack([u_d @ P["att.v"], u_s @ P["att.v"]], axis=1)
        alpha = softmax(scores)
        fused = alpha[:, :1] * h_d + alpha[:, 1:] * h_s
        logits = fused @ P["out.W"].T + P["out.b"]
        cache.update(h_d=h_d, h_s=h_s, u_d=u_d, u_s=u_s, alpha=alpha, fused=fused)
        return logits, cache

    def attention_weights(self, X: np.ndarray) -> np.ndarray:
        return self.forward(X, train=False)[1]["alpha"]

    # -- backward ----------------------------------------------------------

    def backward(self, cache: dict, dlogits: np.ndarray) -> np.ndarray:
        """Gradient of the loss w.r.t. the flat parameter vector, given dL/dlogits.

        ``cache`` must come from a train-mode forward; gradients flow through
        the batch statistics of every BatchNorm layer.
        """
        P = self.params
        flat, G = self.zeros_like_params()
        fused, alpha = cache["fused"], cache["alpha"]
        h_d, h_s, u_d, u_s = cache["h_d"], cache["h_s"], cache["u_d"], cache["u_s"]

        G["out.W"][...] = dlogits.T @ fused
        G["out.b"][...] = dlogits.sum(axis=0)
        dfused = dlogits @ P["out.W"]

        dh = {"deep": alpha[:, :1] * dfused, "shallow": alpha[:, 1:] * dfused}
        dalpha = np.stack([np.sum(dfused * h_d, axis=1), np.sum(dfused * h_s, axis=1)], axis=1)
        dscores = alpha * (dalpha - np.sum(alpha * dalpha, axis=1, keepdims=True))
        for j, (branch, h, u) in enumerate((("deep", h_d, u_d), ("shallow", h_s, u_s))):
            ds = dscores[:, j : j + 1]
            G["att.v"] += np.sum(ds * u, axis=0)
            dpre = ds * P["att.v"] * (1.0 - u * u)
            G[f"att.P_{branch}"][...] = dpre.T @ h
            dh[branch] += dpre @ P[f"att.P_{branch}"]

        dh0 = np.zeros_like(cache["h0"])
        B = len(fused)
        for branch, depth in BRANCHES:
            d = dh[branch]
            for i in reversed(range(depth)):
                name = f"{branch}{i}"
                h_prev, xhat, inv_std, y = cache[branch][i]
                dy = d * (y > 0)
                G[f"{name}.gamma"][...] = np.sum(dy * xhat, axis=0)
                G[f"{name}.beta"][...] = dy.sum(axis=0)
                dxhat = dy * P[f"{name}.gamma"]
                dz = (inv_std / B) * (
                    B * dxhat - dxhat.sum(axis=0) - xhat * np.sum(dxhat * xhat, axis=0)
                )
                G[f"{name}.W"][...] = dz.T @ h_prev
                G[f"{name}.b"][...] = dz.sum(axis=0)
                d = dz @ P[f"{name}.W"]
            dh0 += d

        da0 = dh0 * (cache["a0"] > 0)
        G["in.W"][...] = da0.T @ cache["X"]
        G["in.b"][...] = da0.sum(axis=0)
        return flat

    # -- state -------------------------------------------------------------

    def state_dict(self) -> dict:
        return {
            "params": {name: self.params[name].tolist() for name, _ in self.layout},
            "buffers": {k: v.tolist() for k, v in sorted(self.buffers.items())},
        }

    def load_state(self, state: dict) -> None:
        for name, shape in self.layout:
            value = np.asarray(state["params"][name], dtype=float)
            if value.shape != shape:
                raise ShapeError(f"{name}: expected {shape}, got {value.shape}")
            self.params[name][...] = value
        for k in self.buffers:
            self.buffers[k][...] = np.asarray(state["buffers"][k], dtype=float)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    batch_size: int = 32
    step_size: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    hidden: int = 64
    bn_momentum: float = 0.9
    class_weights: bool = False

    def __post_init__(self) -> None:
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2 for batch statistics")
        if self.epochs < 0 or self.step_size < 0:
            raise ConfigError("epochs and step_size must be non-negative")


class CrossGPModel(Classifier, Standardized):
    """Trained network plus the normalization it expects; takes raw features."""

    kind = "crossgp"

    def __init__(self, net: CrossGPNet, mean, std, config: TrainConfig):
        self.net = net
        self.mean = np.asarray(mean, dtype=float)
        self.std = np.asarray(std, dtype=float)
        self.config = config
        self.loss_history: list[float] = []

    def logits(self, X) -> np.ndarray:
        return self.net.forward(self.normalize(as_matrix(X)), train=False)[0]

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.logits(X))

    def native_importance(self):
        raise Unsupported("the crossgp network has no native importance; use permutation")

    def hyper_dict(self) -> dict:
        return asdict(self.config)

    def params_dict(self) -> dict:
        return self.net.state_dict()


def _batches(order: np.ndarray, batch_size: int) -> list[np.ndarray]:
    batches = [order[i : i + batch_size] for i in range(0, len(order), batch_size)]
    # a trailing batch of one cannot be batch-normalized; fold it into its predecessor
    if len(batches) > 1 and len(batches[-1]) < 2:
        tail = batches.pop()
        batches[-1] = np.concatenate([batches[-1], tail])
    return batches


def train(X, y, config: TrainConfig = TrainConfig(), mean=None, std=None) -> CrossGPModel:
    """Mini-batch Adam on mean cross-entropy; returns a model in infer mode.

    ``X`` holds raw features; ``mean``/``std`` are the train normalization
    statistics (computed from X when omitted). ``model.loss_history`` has the
    mean training loss of every epoch.
    """
    X = as_matrix(X)
    y = np.asarray(y, dtype=np.int64)
    if len(X) < 2:
        raise ConfigError("need at least 2 training examples")
    if mean is None or std is None:
        mean, std = X.mean(axis=0), X.std(axis=0)
    net = CrossGPNet(config.hidden, seed=config.seed, bn_momentum=config.bn_momentum)
    model = CrossGPModel(net, mean, std, config)
    Xn = model.normalize(X)
    weights = None
    if config.class_weights:
        counts = np.bincount(y, minlength=N_CLASSES).astype(float)
        weights = np.where(counts > 0, len(y) / (N_CLASSES * np.maximum(counts, 1.0)), 0.0)

    rng = np.random.default_rng([config.seed, 1])
    m = np.zeros_like(net.flat)
    v = np.zeros_like(net.flat)
    b1, b2 = config.beta1, config.beta2
    t = 0
    for epoch in range(config.epochs):
        total = 0.0
        for idx in _batches(rng.permutation(len(X)), config.batch_size):
            logits, cache = net.forward(Xn[idx], train=True)
            total += cross_entropy(logits, y[idx], weights) * len(idx)
            grad = net.backward(cache, cross_entropy_grad(logits, y[idx], weights))
            t += 1
            m *= b1
            m += (1.0 - b1) * grad
            v *= b2
            v += (1.0 - b2) * grad * grad
            step = config.step_size * math.sqrt(1.0 - b2**t) / (1.0 - b1**t)
            net.flat -= step * m / (np.sqrt(v) + config.adam_eps * math.sqrt(1.0 - b2**t))
        if not np.isfinite(net.flat).all():
            raise NonFinite("epoch", epoch)
        model.loss_history.append(total / len(X))
    return model
