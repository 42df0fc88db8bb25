"""Minimal dense-network building blocks with hand-written backprop.

Everything is float64 numpy.  Forward passes never mutate state, so a
frozen parameter snapshot can serve any number of threads; gradients are
returned to the caller rather than accumulated on the layers.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError


class Linear:
    """Affine layer ``x @ W + b`` with uniform fan-in initialization."""

    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator):
        limit = 1.0 / np.sqrt(d_in)
        self.W = rng.uniform(-limit, limit, size=(d_in, d_out))
        self.b = np.zeros(d_out)


class MLP:
    """Fully connected net with tanh between layers and a linear output.

    ``dims`` lists the layer widths input-first, e.g. ``[128, 64, 5]`` is
    one hidden layer of width 64.
    """

    def __init__(self, dims: list[int], rng: np.random.Generator):
        if len(dims) < 2:
            raise ConfigError(f"an MLP needs at least input and output widths, got {dims}")
        self.dims = list(dims)
        self.layers = [Linear(dims[i], dims[i + 1], rng) for i in range(len(dims) - 1)]

    @property
    def d_in(self) -> int:
        return self.dims[0]

    @property
    def d_out(self) -> int:
        return self.dims[-1]

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Map a batch (B, d_in) to (B, d_out)."""
        h = x
        last = len(self.layers) - 1
        for i, lin in enumerate(self.layers):
            h = h @ lin.W + lin.b
            if i < last:
                h = np.tanh(h)
        return h

    def forward_cached(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Forward pass that also returns each layer's input for backprop."""
        cache = []
        h = x
        last = len(self.layers) - 1
        for i, lin in enumerate(self.layers):
            cache.append(h)
            h = h @ lin.W + lin.b
            if i < last:
                h = np.tanh(h)
        return h, cache

    def backward(
        self, cache: list[np.ndarray], grad_out: np.ndarray
    ) -> tuple[list[tuple[np.ndarray, np.ndarray]], np.ndarray]:
        """Backprop ``grad_out`` (B, d_out); returns per-layer (dW, db) and dx."""
        grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(self.layers)
        g = grad_out
        for i in range(len(self.layers) - 1, -1, -1):
            x_in = cache[i]
            if i < len(self.layers) - 1:
                # cache[i + 1] is this layer's tanh output
                act = cache[i + 1]
                g = g * (1.0 - act * act)
            dW = x_in.T @ g
            db = g.sum(axis=0)
            grads[i] = (dW, db)
            g = g @ self.layers[i].W.T
        return grads, g

    def params(self) -> list[np.ndarray]:
        out = []
        for lin in self.layers:
            out.append(lin.W)
            out.append(lin.b)
        return out

    def flat_grads(self, grads: list[tuple[np.ndarray, np.ndarray]]) -> list[np.ndarray]:
        out = []
        for dW, db in grads:
            out.append(dW)
            out.append(db)
        return out


class SGD:
    """Plain gradient descent with optional momentum, updating in place."""

    def __init__(self, params: list[np.ndarray], lr: float, momentum: float = 0.0):
        if lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {lr}")
        self.params = params
        self.lr = lr
        self.momentum = momentum
        self.velocity = [np.zeros_like(p) for p in params]

    def step(self, grads: list[np.ndarray]) -> None:
        if len(grads) != len(self.params):
            raise ConfigError("gradient list does not match the parameter list")
        for p, v, g in zip(self.params, self.velocity, grads):
            v *= self.momentum
            v += g
            p -= self.lr * v


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax."""
    shifted = z - z.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def logsumexp(z: np.ndarray, axis: int = -1) -> np.ndarray:
    m = z.max(axis=axis, keepdims=True)
    out = m.squeeze(axis) + np.log(np.exp(z - m).sum(axis=axis))
    return out
