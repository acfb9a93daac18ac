"""Fully-connected networks with hand-written reverse-mode gradients.

Inputs are batched row-wise: ``x`` has shape ``(n, in_dim)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from ..domain import ConfigError

ACTIVATIONS = ("relu", "sigmoid", "identity")


@dataclass
class MlpParams:
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    output_activation: str = "identity"
    hidden_activation: str = "relu"

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ConfigError("need one bias per weight matrix and at least one layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ConfigError(f"layer {i}: weight {w.shape} incompatible with bias {b.shape}")
            if i and self.weights[i - 1].shape[1] != w.shape[0]:
                raise ConfigError(f"layer {i}: input size {w.shape[0]} != previous output {self.weights[i - 1].shape[1]}")
        for act in (self.output_activation, self.hidden_activation):
            if act not in ACTIVATIONS:
                raise ConfigError(f"unknown activation {act!r}")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def arrays(self) -> list[np.ndarray]:
        """Parameters in a fixed order: w0, b0, w1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy(self) -> "MlpParams":
        return MlpParams(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.output_activation,
            self.hidden_activation,
        )


def init_mlp(
    layer_sizes: list[int],
    rng: np.random.Generator,
    output_activation: str = "identity",
    final_scale: float | None = None,
) -> MlpParams:
    """Uniform fan-in initialization; ``final_scale`` overrides the last layer's range."""
    weights, biases = [], []
    n_layers = len(layer_sizes) - 1
    for i, (fan_in, fan_out) in enumerate(zip(layer_sizes[:-1], layer_sizes[1:])):
        bound = 1.0 / np.sqrt(fan_in)
        if i == n_layers - 1 and final_scale is not None:
            bound = final_scale
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return MlpParams(weights, biases, output_activation)


def _activate(z, kind):
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "sigmoid":
        return 0.5 * (1.0 + np.tanh(0.5 * z))
    return z


def _activation_grad(z, a, kind):
    if kind == "relu":
        return (z > 0.0).astype(z.dtype)
    if kind == "sigmoid":
        return a * (1.0 - a)
    return None


def mlp_forward(params: MlpParams, x: np.ndarray):
    """Return the network output and the cache needed by :func:`mlp_gradient`."""
    x = np.atleast_2d(x)
    if x.shape[1] != params.weights[0].shape[0]:
        raise ConfigError(f"input width {x.shape[1]} != network input size {params.weights[0].shape[0]}")
    inputs, pre, post = [], [], []
    a = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(a)
        z = a @ w + b
        a = _activate(z, params.output_activation if i == last else params.hidden_activation)
        pre.append(z)
        post.append(a)
    return a, (inputs, pre, post)


def mlp_gradient(params: MlpParams, cache, upstream: np.ndarray):
    """Backpropagate ``upstream = dL/dy`` through the network.

    Returns ``(grads, dx)`` where ``grads`` follows :meth:`MlpParams.arrays` order.
    """
    inputs, pre, post = cache
    g = np.atleast_2d(upstream)
    if g.shape != post[-1].shape:
        raise ConfigError(f"upstream gradient {g.shape} does not match output {post[-1].shape}")
    last = len(params.weights) - 1
    grads = [None] * (2 * len(params.weights))
    for i in range(last, -1, -1):
        kind = params.output_activation if i == last else params.hidden_activation
        d_act = _activation_grad(pre[i], post[i], kind)
        if d_act is not None:
            g = g * d_act
        grads[2 * i] = inputs[i].T @ g
        grads[2 * i + 1] = g.sum(axis=0)
        g = g @ params.weights[i].T
    return grads, g
