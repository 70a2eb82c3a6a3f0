"""Fully connected ELU network with hand-written backpropagation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def elu(x: np.ndarray) -> np.ndarray:
    # expm1(x) >= x for x <= 0, so the max picks the right branch everywhere
    return np.maximum(x, np.expm1(np.minimum(x, 0)))


def elu_grad(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, 1.0, np.exp(np.minimum(x, 0))).astype(x.dtype, copy=False)


def elu_grad_from_output(a: np.ndarray) -> np.ndarray:
    """ELU derivative written in terms of the activation: ``exp(z) = elu(z) + 1`` for ``z <= 0``."""
    return np.minimum(a, 0) + 1


@dataclass
class Mlp:
    """Weights are stored ``(fan_in, fan_out)`` so a layer is ``x @ W + b``."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def init(
        cls,
        sizes: list[int],
        rng: np.random.Generator,
        out_scale: float = 0.01,
        dtype=np.float32,
    ) -> "Mlp":
        weights, biases = [], []
        for k, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            bound = np.sqrt(1.0 / n_in)
            W = rng.uniform(-bound, bound, (n_in, n_out))
            b = rng.uniform(-bound, bound, n_out)
            if k == len(sizes) - 2:
                W, b = W * out_scale, b * out_scale
            weights.append(W.astype(dtype))
            biases.append(b.astype(dtype))
        return cls(weights, biases)

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [W.shape[1] for W in self.weights]

    @property
    def dtype(self):
        return self.weights[0].dtype

    def params(self) -> list[np.ndarray]:
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def astype(self, dtype) -> "Mlp":
        return Mlp([W.astype(dtype) for W in self.weights], [b.astype(dtype) for b in self.biases])

    def copy(self) -> "Mlp":
        return self.astype(self.dtype)

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Return the output and the cache needed by :meth:`backward`.

        The cache holds the layer inputs followed by the hidden
        pre-activations: ``[a_0, z_1, a_1, z_2, ...]``.
        """
        if x.shape[-1] != self.weights[0].shape[0]:
            raise ValueError(
                f"input width {x.shape[-1]} does not match network input {self.weights[0].shape[0]}"
            )
        a = x.astype(self.dtype, copy=False)
        cache = [a]
        last = len(self.weights) - 1
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ W + b
            if k == last:
                return z, cache
            a = elu(z)
            cache += [z, a]
        raise AssertionError("unreachable")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache: list[np.ndarray], dy: np.ndarray) -> list[np.ndarray]:
        """Gradients ``[dW_1, db_1, dW_2, db_2, ...]`` for upstream gradient ``dy``."""
        grads: list[np.ndarray] = []
        n = len(self.weights)
        delta = dy
        for k in range(n - 1, -1, -1):
            a_in = cache[2 * k]
            grads = [a_in.T @ delta, delta.sum(axis=0)] + grads
            if k > 0:
                delta = (delta @ self.weights[k].T) * elu_grad_from_output(a_in)
        return grads
