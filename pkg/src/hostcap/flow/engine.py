"""Minimal reverse-mode gradient engine for the coupling conditioners.

The conditioner computation graph is small and fixed (two tanh hidden
layers, linear head), so gradients are accumulated by hand rather than
pulling in an autodiff dependency. tanh keeps everything smooth, which the
finite-difference gradient checks rely on.
"""

from __future__ import annotations

import numpy as np


class Mlp:
    """Two-hidden-layer perceptron mapping conditioner inputs to (log-scale, shift)."""

    def __init__(self, n_in: int, n_hidden: int, n_out: int, rng: np.random.Generator):
        # zero-initialized head makes the owning coupling layer start as identity
        self.W1 = rng.normal(0.0, 1.0 / np.sqrt(max(n_in, 1)), size=(n_in, n_hidden))
        self.b1 = np.zeros(n_hidden)
        self.W2 = rng.normal(0.0, 1.0 / np.sqrt(n_hidden), size=(n_hidden, n_hidden))
        self.b2 = np.zeros(n_hidden)
        self.W3 = np.zeros((n_hidden, n_out))
        self.b3 = np.zeros(n_out)

    @property
    def parameters(self) -> list[np.ndarray]:
        return [self.W1, self.b1, self.W2, self.b2, self.W3, self.b3]

    def set_parameters(self, params: list[np.ndarray]) -> None:
        self.W1, self.b1, self.W2, self.b2, self.W3, self.b3 = [np.array(p) for p in params]

    def forward(self, X: np.ndarray):
        h1 = np.tanh(X @ self.W1 + self.b1)
        h2 = np.tanh(h1 @ self.W2 + self.b2)
        out = h2 @ self.W3 + self.b3
        return out, (X, h1, h2)

    def backward(self, cache, g_out: np.ndarray):
        X, h1, h2 = cache
        g_W3 = h2.T @ g_out
        g_b3 = g_out.sum(axis=0)
        g_h2 = (g_out @ self.W3.T) * (1.0 - h2 ** 2)
        g_W2 = h1.T @ g_h2
        g_b2 = g_h2.sum(axis=0)
        g_h1 = (g_h2 @ self.W2.T) * (1.0 - h1 ** 2)
        g_W1 = X.T @ g_h1
        g_b1 = g_h1.sum(axis=0)
        g_X = g_h1 @ self.W1.T
        return g_X, [g_W1, g_b1, g_W2, g_b2, g_W3, g_b3]


class Adam:
    """Adaptive-moment gradient descent over a flat list of arrays."""

    def __init__(self, learning_rate: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self._m: list[np.ndarray] | None = None
        self._v: list[np.ndarray] | None = None
        self._t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if self._m is None:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        self._t += 1
        b1, b2 = self.beta1, self.beta2
        corr1 = 1.0 - b1 ** self._t
        corr2 = 1.0 - b2 ** self._t
        for p, g, m, v in zip(params, grads, self._m, self._v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g ** 2
            p -= self.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + self.eps)


def clip_global_norm(grads: list[np.ndarray], max_norm: float) -> float:
    """Scale gradients in place so their global L2 norm is at most max_norm."""
    total = float(np.sqrt(sum(float((g ** 2).sum()) for g in grads)))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / total
        for g in grads:
            g *= scale
    return total
