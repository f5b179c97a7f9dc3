"""Minimal dense neural network with explicit backpropagation.

Float64 throughout, numpy only. The network is a stack of affine layers
with ReLU between them and a linear head; gradients are computed by the
chain rule against an upstream dL/dy, so the same net serves Q-learning
(MSE head), a policy head (softmax handled by the caller), and a value
head. Checkpoints round-trip bit for bit through npz.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .engine import RngStream


class TrainingDiverged(RuntimeError):
    """A gradient or parameter became non-finite."""


@dataclass
class Gradients:
    d_weights: list[np.ndarray]
    d_biases: list[np.ndarray]
    d_input: np.ndarray

    def any_non_finite(self) -> bool:
        return any(
            not np.all(np.isfinite(g)) for g in (*self.d_weights, *self.d_biases)
        )


class DenseNet:
    """Fully connected ReLU network; weights[i] has shape (fan_in, fan_out)."""

    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray]) -> None:
        if len(weights) != len(biases) or not weights:
            raise ValueError("need matching weight/bias lists")
        self.weights = weights
        self.biases = biases

    @classmethod
    def create(cls, layer_sizes: tuple[int, ...], stream: RngStream) -> "DenseNet":
        """Uniform +-1/sqrt(fan_in) init for each layer's weights and bias."""
        if len(layer_sizes) < 2 or any(s <= 0 for s in layer_sizes):
            raise ValueError(f"bad layer sizes {layer_sizes}")
        rng = stream.rng
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_sizes, layer_sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(weights, biases)

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    def forward(self, x: np.ndarray) -> np.ndarray:
        y, _ = self.forward_batch(np.asarray(x, dtype=float).reshape(1, -1))
        return y[0]

    def forward_batch(self, x: np.ndarray) -> tuple[np.ndarray, tuple]:
        """Returns (output, cache); the cache feeds backward_batch."""
        h = np.asarray(x, dtype=float)
        if h.ndim != 2 or h.shape[1] != self.weights[0].shape[0]:
            raise ValueError(f"expected batch of width {self.weights[0].shape[0]}")
        inputs = [h]
        pre_activations = []
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            pre_activations.append(z)
            h = z if i == last else np.maximum(z, 0.0)
            if i != last:
                inputs.append(h)
        return h, (inputs, pre_activations)

    def backward_batch(self, cache: tuple, upstream: np.ndarray) -> Gradients:
        """Chain rule from dL/dy back to every parameter.

        ReLU uses subgradient 0 at exactly 0. Gradients are summed over the
        batch; the caller owns any 1/B averaging inside `upstream`.
        """
        inputs, pre_activations = cache
        d_weights = [None] * len(self.weights)
        d_biases = [None] * len(self.biases)
        dz = np.asarray(upstream, dtype=float)
        for i in range(len(self.weights) - 1, -1, -1):
            if i != len(self.weights) - 1:
                dz = dz * (pre_activations[i] > 0.0)
            d_weights[i] = inputs[i].T @ dz
            d_biases[i] = dz.sum(axis=0)
            dz = dz @ self.weights[i].T
        return Gradients(d_weights, d_biases, dz)

    def copy(self) -> "DenseNet":
        return DenseNet([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def copy_from(self, other: "DenseNet") -> None:
        for mine, theirs in zip(self.weights, other.weights):
            mine[...] = theirs
        for mine, theirs in zip(self.biases, other.biases):
            mine[...] = theirs

    def parameter_count(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def checksum(self) -> str:
        digest = hashlib.sha256()
        digest.update(repr(self.layer_sizes).encode())
        for arr in (*self.weights, *self.biases):
            digest.update(np.ascontiguousarray(arr).tobytes())
        return digest.hexdigest()

    def save(self, path: str) -> None:
        payload = {"format_version": np.int64(1),
                   "layer_sizes": np.asarray(self.layer_sizes, dtype=np.int64)}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            payload[f"w{i}"] = w
            payload[f"b{i}"] = b
        np.savez(path, **payload)

    @classmethod
    def load(cls, path: str) -> "DenseNet":
        with np.load(path) as data:
            sizes = tuple(int(s) for s in data["layer_sizes"])
            weights = [data[f"w{i}"].astype(float) for i in range(len(sizes) - 1)]
            biases = [data[f"b{i}"].astype(float) for i in range(len(sizes) - 1)]
        net = cls(weights, biases)
        if net.layer_sizes != sizes:
            raise ValueError("checkpoint layer sizes do not match arrays")
        return net


class SgdOptimizer:
    def __init__(self, learning_rate: float) -> None:
        if learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        self.learning_rate = learning_rate
        self.steps = 0

    def step(self, net: DenseNet, grads: Gradients) -> None:
        if grads.any_non_finite():
            raise TrainingDiverged("non-finite gradient")
        lr = self.learning_rate
        for w, dw in zip(net.weights, grads.d_weights):
            w -= lr * dw
        for b, db in zip(net.biases, grads.d_biases):
            b -= lr * db
        self.steps += 1


class AdamOptimizer:
    def __init__(
        self,
        learning_rate: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ) -> None:
        if learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.steps = 0
        self._m: list[np.ndarray] | None = None
        self._v: list[np.ndarray] | None = None

    def step(self, net: DenseNet, grads: Gradients) -> None:
        if grads.any_non_finite():
            raise TrainingDiverged("non-finite gradient")
        params = [*net.weights, *net.biases]
        gs = [*grads.d_weights, *grads.d_biases]
        if self._m is None:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        self.steps += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1**self.steps
        bias2 = 1.0 - b2**self.steps
        for p, g, m, v in zip(params, gs, self._m, self._v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= self.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + self.epsilon)


def make_optimizer(kind: str, learning_rate: float):
    if kind == "adam":
        return AdamOptimizer(learning_rate)
    if kind == "sgd":
        return SgdOptimizer(learning_rate)
    raise ValueError(f"unknown optimizer '{kind}'")
