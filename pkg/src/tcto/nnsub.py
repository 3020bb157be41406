"""Minimal dense network substrate: Glorot init, ReLU hiddens, manual backprop.

Everything the value networks need and nothing more: forward, squared-error
gradients, SGD updates, and parameter copies between twin networks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class DenseNet:
    """Fully connected layers; ReLU between layers, linear final output."""

    weights: list
    biases: list

    @classmethod
    def create(cls, dims, rng: np.random.Generator) -> "DenseNet":
        dims = list(int(d) for d in dims)
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise ValueError(f"need at least input and output dims >= 1, got {dims}")
        weights, biases = [], []
        for d_in, d_out in zip(dims, dims[1:]):
            weights.append(glorot_uniform(d_in, d_out, rng))
            biases.append(np.zeros(d_out))
        return cls(weights=weights, biases=biases)

    @property
    def dims(self) -> tuple:
        return tuple([self.weights[0].shape[0]] + [w.shape[1] for w in self.weights])


def glorot_uniform(d_in: int, d_out: int, rng: np.random.Generator) -> np.ndarray:
    limit = np.sqrt(6.0 / (d_in + d_out))
    return rng.uniform(-limit, limit, size=(d_in, d_out))


def forward(net: DenseNet, x) -> np.ndarray:
    y, _ = forward_cache(net, x)
    return y


def forward_cache(net: DenseNet, x):
    """Returns (output, cache); accepts a single vector or a (B, d) batch."""
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    a = x[None, :] if squeeze else x
    if a.shape[1] != net.weights[0].shape[0]:
        raise ValueError(
            f"input dim {a.shape[1]} does not match net dim {net.weights[0].shape[0]}"
        )
    activations = [a]
    pre = []
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w + b
        pre.append(z)
        a = z if i == last else np.maximum(z, 0.0)
        activations.append(a)
    out = a[0] if squeeze else a
    return out, (activations, pre, squeeze)


def backprop(net: DenseNet, cache, dy):
    """Gradients of a scalar loss given d(loss)/d(output); returns (grads, dx).

    grads is a list of (dW, db) aligned with the layers; dx matches the input.
    """
    activations, pre, squeeze = cache
    dy = np.asarray(dy, dtype=float)
    da = dy[None, :] if squeeze else dy
    grads: list = [None] * len(net.weights)
    last = len(net.weights) - 1
    for i in range(last, -1, -1):
        dz = da if i == last else da * (pre[i] > 0.0)
        grads[i] = (activations[i].T @ dz, dz.sum(axis=0))
        da = dz @ net.weights[i].T
    return grads, (da[0] if squeeze else da)


def backward_mse(net: DenseNet, x, target):
    """Squared-error loss and its parameter gradients for one input."""
    target = np.asarray(target, dtype=float)
    y, cache = forward_cache(net, x)
    diff = y - target
    loss = float(np.sum(diff * diff))
    grads, _ = backprop(net, cache, 2.0 * diff)
    return loss, grads


def zero_grads(net: DenseNet) -> list:
    return [(np.zeros_like(w), np.zeros_like(b)) for w, b in zip(net.weights, net.biases)]


def add_grads(acc: list, grads: list, scale: float = 1.0) -> None:
    for (aw, ab), (gw, gb) in zip(acc, grads):
        aw += scale * gw
        ab += scale * gb


def sgd_step(net: DenseNet, grads: list, lr: float) -> None:
    for (w, b), (gw, gb) in zip(zip(net.weights, net.biases), grads):
        w -= lr * gw
        b -= lr * gb


def copy_params(src: DenseNet, dst: DenseNet) -> None:
    if src.dims != dst.dims:
        raise ValueError(f"shape mismatch: {src.dims} vs {dst.dims}")
    for ws, wd in zip(src.weights, dst.weights):
        wd[...] = ws
    for bs, bd in zip(src.biases, dst.biases):
        bd[...] = bs


def clone(net: DenseNet) -> DenseNet:
    return DenseNet(
        weights=[w.copy() for w in net.weights],
        biases=[b.copy() for b in net.biases],
    )
