"""Dense feed-forward networks in numpy: forward, BCE, backprop, Adam."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import expit

from .errors import BadShape, DimensionMismatch, Diverged, ShapeMismatch, StaleCache

BCE_EPS = 1e-7
DECISION_THRESHOLD = 0.5


class Activation(str, enum.Enum):
    RELU = "relu"
    SIGMOID = "sigmoid"
    LINEAR = "linear"


def _activate(kind, z):
    if kind is Activation.RELU:
        return np.maximum(z, 0.0)
    if kind is Activation.SIGMOID:
        return expit(z)
    return z


def _activation_grad(kind, z, a, upstream):
    if kind is Activation.RELU:
        return upstream * (z > 0)
    if kind is Activation.SIGMOID:
        return upstream * a * (1.0 - a)
    return upstream


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out, in)
    biases: np.ndarray  # (out,)
    activation: Activation

    @property
    def fan_in(self):
        return self.weights.shape[1]

    @property
    def fan_out(self):
        return self.weights.shape[0]


@dataclass
class Mlp:
    layers: list
    loss_history: list = field(default_factory=list)
    version: int = 0

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if a.fan_out != b.fan_in:
                raise BadShape(f"layer output {a.fan_out} does not feed input {b.fan_in}")

    @property
    def widths(self):
        return [self.layers[0].fan_in] + [layer.fan_out for layer in self.layers]

    @property
    def activations(self):
        return [layer.activation for layer in self.layers]

    def parameters(self):
        """Flat list ``[W1, b1, W2, b2, ...]``."""
        out = []
        for layer in self.layers:
            out += [layer.weights, layer.biases]
        return out

    def set_parameters(self, params):
        if len(params) != 2 * len(self.layers):
            raise ShapeMismatch(f"expected {2 * len(self.layers)} arrays, got {len(params)}")
        for layer, w, b in zip(self.layers, params[::2], params[1::2]):
            if w.shape != layer.weights.shape or b.shape != layer.biases.shape:
                raise ShapeMismatch("parameter shapes changed")
            layer.weights, layer.biases = w, b
        self.version += 1

    def copy(self):
        layers = [DenseLayer(l.weights.copy(), l.biases.copy(), l.activation) for l in self.layers]
        return Mlp(layers, list(self.loss_history), self.version)


def init_mlp(widths, activations, seed=0):
    """Glorot-uniform weights, zero biases, deterministic in ``seed``."""
    widths = [int(w) for w in widths]
    if len(widths) < 2 or any(w < 1 for w in widths):
        raise BadShape(f"invalid widths {widths}")
    if len(activations) != len(widths) - 1:
        raise BadShape(f"{len(widths) - 1} layers need as many activations, got {len(activations)}")
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out, act in zip(widths, widths[1:], activations):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        layers.append(DenseLayer(w, np.zeros(fan_out), Activation(act)))
    return Mlp(layers)


@dataclass
class ForwardCache:
    inputs: list
    pre: list
    post: list
    version: int
    net_id: int


def forward(net, batch):
    """Run ``batch`` (rows x features) through ``net``; returns ``(output, cache)``."""
    x = np.atleast_2d(np.asarray(batch, dtype=float))
    if x.shape[1] != net.layers[0].fan_in:
        raise DimensionMismatch(f"batch has {x.shape[1]} columns, network expects {net.layers[0].fan_in}")
    inputs, pre, post = [], [], []
    a = x
    for layer in net.layers:
        inputs.append(a)
        z = a @ layer.weights.T + layer.biases
        a = _activate(layer.activation, z)
        pre.append(z)
        post.append(a)
    return a, ForwardCache(inputs, pre, post, net.version, id(net))


def backward(net, cache, loss_grad, return_input_grad=False):
    """Reverse-mode pass. ``loss_grad`` is dL/d(output), same shape as the output.

    Returns gradients ordered like ``net.parameters()``; with
    ``return_input_grad`` also dL/d(input).
    """
    if cache.net_id != id(net) or cache.version != net.version:
        raise StaleCache("forward cache does not belong to the current parameters")
    g = np.asarray(loss_grad, dtype=float)
    if g.shape != cache.post[-1].shape:
        raise DimensionMismatch(f"loss_grad shape {g.shape} != output shape {cache.post[-1].shape}")
    grads = []
    for layer, x, z, a in zip(reversed(net.layers), reversed(cache.inputs),
                              reversed(cache.pre), reversed(cache.post)):
        dz = _activation_grad(layer.activation, z, a, g)
        grads.append(dz.sum(axis=0))
        grads.append(dz.T @ x)
        g = dz @ layer.weights
    grads.reverse()
    return (grads, g) if return_input_grad else grads


def _clamp(p):
    return np.clip(p, BCE_EPS, 1.0 - BCE_EPS)


def bce_loss(predicted, target):
    """Mean binary cross-entropy with predictions clamped to [1e-7, 1 - 1e-7]."""
    p = np.asarray(predicted, dtype=float).ravel()
    t = np.asarray(target, dtype=float).ravel()
    if p.shape != t.shape:
        raise DimensionMismatch(f"{p.shape} predictions vs {t.shape} targets")
    p = _clamp(p)
    return float(-np.mean(t * np.log(p) + (1.0 - t) * np.log(1.0 - p)))


def bce_grad(predicted, target):
    """dL/dp of :func:`bce_loss`, shaped like ``predicted``."""
    p = np.asarray(predicted, dtype=float)
    t = np.asarray(target, dtype=float).reshape(p.shape)
    pc = _clamp(p)
    return (pc - t) / (pc * (1.0 - pc)) / p.size


@dataclass
class AdamState:
    first_moment: list
    second_moment: list
    step_count: int = 0
    learning_rate: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def zeros_like(cls, params, **hyper):
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], **hyper)


def _adam_kernel(params, grads, first, second, state):
    """In-place Adam update of ``params``, ``first`` and ``second``; returns the new step count."""
    t = state.step_count + 1
    b1, b2 = state.beta1, state.beta2
    lr_t = state.learning_rate / (1.0 - b1 ** t)
    root_c2 = math.sqrt(1.0 - b2 ** t)
    for p, g, m, v in zip(params, grads, first, second):
        if p.shape != g.shape or p.shape != m.shape or p.shape != v.shape:
            raise ShapeMismatch(f"parameter {p.shape} vs gradient {g.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        denom = np.sqrt(v)
        denom /= root_c2
        denom += state.epsilon
        np.divide(m, denom, out=denom)
        denom *= lr_t
        p -= denom
    return t


def adam_step(params, grads, state):
    """One bias-corrected Adam update; returns ``(new_params, new_state)``.

    Inputs are left untouched. The update is
    ``p - lr / (1 - b1**t) * m / (sqrt(v) / sqrt(1 - b2**t) + eps)``.
    """
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ShapeMismatch("params, grads and moments differ in length")
    new_params = [np.array(p, dtype=float, copy=True) for p in params]
    first = [m.copy() for m in state.first_moment]
    second = [v.copy() for v in state.second_moment]
    t = _adam_kernel(new_params, grads, first, second, state)
    return new_params, replace(state, first_moment=first, second_moment=second, step_count=t)


def apply_adam(net, grads, state):
    """Update ``net`` and ``state`` in place (same arithmetic as :func:`adam_step`)."""
    if len(grads) != len(state.first_moment):
        raise ShapeMismatch("gradient count does not match optimizer state")
    params = net.parameters()
    state.step_count = _adam_kernel(params, grads, state.first_moment, state.second_moment, state)
    for p in params:
        if not np.isfinite(p).all():
            raise Diverged("non-finite parameters after Adam step")
    net.version += 1
    return state


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    epochs: int = 200
    learning_rate: float = 1e-5
    seed: int = 0
    hidden: tuple = (256, 128)

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


def train_classifier(train, cfg):
    """Fit a ReLU MLP with a sigmoid unit by minibatch Adam on BCE.

    Minibatch order is reshuffled every epoch from a generator seeded by
    ``cfg.seed``; the mean loss of each epoch is kept in ``loss_history``.
    """
    x, y = train.features, train.labels.astype(float)
    if len(y) == 0 or y.min() == y.max():
        raise ValueError("training data must contain both classes")
    seeds = np.random.SeedSequence(cfg.seed).spawn(2)
    widths = [x.shape[1], *cfg.hidden, 1]
    net = init_mlp(widths, ["relu"] * len(cfg.hidden) + ["sigmoid"], seed=seeds[0])
    state = AdamState.zeros_like(net.parameters(), learning_rate=cfg.learning_rate)
    rng = np.random.default_rng(seeds[1])
    n = len(y)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            out, cache = forward(net, x[idx])
            target = y[idx, None]
            loss = bce_loss(out, target)
            if not math.isfinite(loss):
                raise Diverged("classifier loss is not finite")
            total += loss * len(idx)
            grads = backward(net, cache, bce_grad(out, target))
            state = apply_adam(net, grads, state)
        net.loss_history.append(total / n)
    return net


def predict_proba(net, features):
    out, _ = forward(net, features)
    return out[:, 0] if out.shape[1] == 1 else out


def predict(net, features, threshold=DECISION_THRESHOLD):
    """Hard labels; a probability exactly at ``threshold`` maps to class 1."""
    return (predict_proba(net, features) >= threshold).astype(np.int64)


def save_mlp(net, path):
    """Structured-text dump: widths, activations, row-major weights and biases."""
    doc = {
        "format": "bsgan-mlp",
        "version": 1,
        "widths": net.widths,
        "activations": [a.value for a in net.activations],
        "layers": [{"weights": l.weights.tolist(), "biases": l.biases.tolist()} for l in net.layers],
        "loss_history": list(net.loss_history),
    }
    Path(path).write_text(json.dumps(doc))


def load_mlp(path):
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "bsgan-mlp":
        raise ValueError(f"{path} is not a bsgan model file")
    layers = [
        DenseLayer(np.array(l["weights"], dtype=float), np.array(l["biases"], dtype=float), Activation(a))
        for l, a in zip(doc["layers"], doc["activations"])
    ]
    net = Mlp(layers, list(doc.get("loss_history", [])))
    if net.widths != doc["widths"]:
        raise BadShape("stored widths disagree with weight shapes")
    return net
