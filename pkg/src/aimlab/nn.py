"""Small dense-network engine in float64 numpy.

Only what the generator, critic and detector need: fully connected layers with
elu/relu/linear activations, reverse-mode gradients (including the gradient
with respect to the input, so a generator can be trained through a critic),
Adam and RMSprop, weight clipping and a binary checkpoint format.

Checkpoint layout (all integers little-endian)::

    b"AMLP"                      magic
    uint32                       format version (currently 1)
    uint32                       header length in bytes
    header                       UTF-8 JSON: {"layers": [{"in", "out", "activation"}], "meta": {...}}
    float64[...]                 per layer: weight (in x out, row-major), then bias (out)
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

ACTIVATIONS = ("elu", "relu", "linear")
CHECKPOINT_MAGIC = b"AMLP"
CHECKPOINT_VERSION = 1


def elu(x):
    # expm1 on the clipped branch keeps large positive inputs from overflowing
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def elu_grad(x):
    return np.where(x > 0, 1.0, np.exp(np.minimum(x, 0.0)))


def relu(x):
    return np.maximum(x, 0.0)


def relu_grad(x):
    return (x > 0).astype(np.float64)


_FORWARD = {"elu": elu, "relu": relu, "linear": lambda x: x}
_BACKWARD = {"elu": elu_grad, "relu": relu_grad, "linear": lambda x: np.ones_like(x)}


@dataclass
class Layer:
    weight: np.ndarray  # (fan_in, fan_out)
    bias: np.ndarray  # (fan_out,)
    activation: str

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise ValueError(
                f"layer shapes disagree: weight {self.weight.shape}, bias {self.bias.shape}"
            )


@dataclass
class ForwardCache:
    inputs: list  # input to each layer
    preacts: list  # pre-activation of each layer


class Mlp:
    """A stack of dense layers; ``forward`` maps (batch, input_dim) -> (batch, output_dim)."""

    def __init__(self, layers: Sequence[Layer], meta: dict | None = None):
        if not layers:
            raise ValueError("an Mlp needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.weight.shape[1] != nxt.weight.shape[0]:
                raise ValueError(
                    f"adjacent layers disagree: {prev.weight.shape} -> {nxt.weight.shape}"
                )
        self.layers = list(layers)
        self.meta = dict(meta or {})

    @classmethod
    def build(cls, sizes: Sequence[int], activations: Sequence[str], rng: np.random.Generator,
              meta: dict | None = None) -> "Mlp":
        """Random init: Glorot-uniform for elu/linear layers, He-uniform for relu layers."""
        if len(activations) != len(sizes) - 1:
            raise ValueError("need one activation per layer")
        layers = []
        for fan_in, fan_out, act in zip(sizes[:-1], sizes[1:], activations):
            if act == "relu":
                bound = np.sqrt(6.0 / fan_in)
            else:
                bound = np.sqrt(6.0 / (fan_in + fan_out))
            w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            layers.append(Layer(w, np.zeros(fan_out), act))
        return cls(layers, meta)

    @property
    def input_dim(self) -> int:
        return self.layers[0].weight.shape[0]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weight.shape[1]

    def params(self) -> list:
        """Parameter arrays in checkpoint order (w0, b0, w1, b1, ...); these are the live arrays."""
        out = []
        for layer in self.layers:
            out.extend((layer.weight, layer.bias))
        return out

    def weights(self) -> list:
        return [layer.weight for layer in self.layers]

    def copy(self) -> "Mlp":
        return Mlp([Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers],
                   self.meta)

    def forward(self, x, cache: bool = False):
        h = np.asarray(x, dtype=np.float64)
        if h.ndim == 1:
            h = h[None, :]
        if h.shape[1] != self.input_dim:
            raise ValueError(f"expected input dim {self.input_dim}, got {h.shape[1]}")
        inputs, preacts = [], []
        for layer in self.layers:
            inputs.append(h)
            a = h @ layer.weight + layer.bias
            preacts.append(a)
            h = _FORWARD[layer.activation](a)
        if cache:
            return h, ForwardCache(inputs, preacts)
        return h

    __call__ = forward

    def backward(self, cache: ForwardCache, grad_out):
        """Return (parameter gradients in ``params()`` order, gradient w.r.t. the input)."""
        g = np.asarray(grad_out, dtype=np.float64)
        grads = [None] * (2 * len(self.layers))
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            g = g * _BACKWARD[layer.activation](cache.preacts[i])
            grads[2 * i] = cache.inputs[i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ layer.weight.T
        return grads, g


def weighted_cross_entropy(logits, labels, class_weights):
    """Mean of weight[label] * -log softmax(logits)[label] over the batch, and its logit gradient."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    w = np.asarray(class_weights, dtype=np.float64)[labels]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_p = shifted - log_norm
    n = logits.shape[0]
    rows = np.arange(n)
    loss = float(np.sum(-w * log_p[rows, labels]) / n)
    grad = np.exp(log_p)
    grad[rows, labels] -= 1.0
    grad *= (w / n)[:, None]
    return loss, grad


def inverse_prior_weights(labels) -> np.ndarray:
    """Class weights 1 - p(class); p is the class frequency in ``labels``."""
    labels = np.asarray(labels, dtype=np.int64)
    p_pos = float(np.mean(labels == 1))
    return np.array([p_pos, 1.0 - p_pos])


@dataclass
class Adam:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    kind: str = "adam"

    def step(self, params, grads):
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.step_count += 1
        c1 = 1.0 - self.beta1 ** self.step_count
        c2 = 1.0 - self.beta2 ** self.step_count
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class RMSprop:
    lr: float = 5e-5
    decay: float = 0.9
    eps: float = 1e-8
    step_count: int = 0
    v: list = field(default_factory=list)
    kind: str = "rmsprop"

    def step(self, params, grads):
        if not self.v:
            self.v = [np.zeros_like(p) for p in params]
        self.step_count += 1
        for p, g, v in zip(params, grads, self.v):
            v *= self.decay
            v += (1.0 - self.decay) * g * g
            p -= self.lr * g / (np.sqrt(v) + self.eps)


def make_optimizer(kind: str, lr: float):
    if kind == "adam":
        return Adam(lr=lr)
    if kind == "rmsprop":
        return RMSprop(lr=lr)
    raise ValueError(f"unknown optimizer {kind!r}")


def clip_weights(model: Mlp, w_max: float) -> Mlp:
    """Clip every parameter (weights and biases) into [-w_max, w_max], in place."""
    for p in model.params():
        np.clip(p, -w_max, w_max, out=p)
    return model


def numerical_gradient(loss_fn: Callable[[], float], param: np.ndarray, index, h: float = 1e-4) -> float:
    """Central difference d loss / d param[index]; ``param`` is perturbed in place and restored."""
    orig = param[index]
    param[index] = orig + h
    up = loss_fn()
    param[index] = orig - h
    down = loss_fn()
    param[index] = orig
    return (up - down) / (2.0 * h)


def gradient_check(model: Mlp, loss_and_grad: Callable[[Mlp], tuple], probes: int,
                   rng: np.random.Generator, h: float = 1e-4) -> float:
    """Largest relative error between analytic and central-difference gradients.

    ``loss_and_grad(model)`` returns (loss, grads in ``params()`` order). Probes are drawn
    uniformly over all parameter entries.
    """
    _, grads = loss_and_grad(model)
    params = model.params()
    sizes = np.array([p.size for p in params])
    worst = 0.0
    for _ in range(probes):
        k = int(rng.choice(len(params), p=sizes / sizes.sum()))
        idx = np.unravel_index(int(rng.integers(params[k].size)), params[k].shape)
        numeric = numerical_gradient(lambda: loss_and_grad(model)[0], params[k], idx, h)
        analytic = grads[k][idx]
        denom = max(abs(numeric), abs(analytic), 1e-8)
        worst = max(worst, abs(numeric - analytic) / denom)
    return worst


def save_mlp(model: Mlp, path) -> None:
    header = {
        "layers": [
            {"in": l.weight.shape[0], "out": l.weight.shape[1], "activation": l.activation}
            for l in model.layers
        ],
        "meta": model.meta,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(blob)))
        fh.write(blob)
        for p in model.params():
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_mlp(path) -> Mlp:
    data = Path(path).read_bytes()
    if data[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not an MLP checkpoint")
    version, hlen = struct.unpack("<II", data[4:12])
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(data[12:12 + hlen].decode("utf-8"))
    offset = 12 + hlen
    layers = []
    for spec in header["layers"]:
        n_w = spec["in"] * spec["out"]
        w = np.frombuffer(data, dtype="<f8", count=n_w, offset=offset).reshape(spec["in"], spec["out"])
        offset += 8 * n_w
        b = np.frombuffer(data, dtype="<f8", count=spec["out"], offset=offset)
        offset += 8 * spec["out"]
        layers.append(Layer(w.astype(np.float64), b.astype(np.float64), spec["activation"]))
    if offset != len(data):
        raise ValueError(f"{path}: trailing bytes in checkpoint")
    return Mlp(layers, header.get("meta"))
