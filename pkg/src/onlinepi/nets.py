"""Minimal dense networks with hand-rolled backprop and Adam.

Networks are rectifier-activated on hidden layers and linear on the output.
A network plus its optimizer state forms one mutable unit; forwards on a
network that nobody is updating are safe from any context.
"""

from __future__ import annotations

from typing import List, Sequence, Tuple

import numpy as np

from .errors import NumericalFault

__all__ = ["DenseNetwork", "Adam", "dueling_combine", "soft_update"]

Grads = List[Tuple[np.ndarray, np.ndarray]]


class DenseNetwork:
    """Fully connected feedforward net: relu hidden layers, identity output.

    Weights are initialized from ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))`` with
    the supplied generator; biases start at zero.  ``weights[i]`` has shape
    ``(layer_sizes[i], layer_sizes[i+1])`` so batches flow as ``x @ W + b``.
    """

    def __init__(self, layer_sizes: Sequence[int], rng: np.random.Generator | None = None):
        sizes = tuple(int(s) for s in layer_sizes)
        if len(sizes) < 2 or any(s <= 0 for s in sizes):
            raise ValueError(f"layer_sizes needs >= 2 positive entries, got {sizes}")
        self.layer_sizes = sizes
        rng = rng if rng is not None else np.random.default_rng()
        self.weights: List[np.ndarray] = []
        self.biases: List[np.ndarray] = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    @property
    def input_size(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_size(self) -> int:
        return self.layer_sizes[-1]

    def _check_input(self, x: np.ndarray) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x.reshape(1, -1)
        if x.ndim != 2 or x.shape[1] != self.input_size:
            raise ValueError(f"expected input of size {self.input_size}, got shape {x.shape}")
        return x, single

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Deterministic forward pass; accepts a vector or a batch of rows."""
        x, single = self._check_input(x)
        a = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            a = np.maximum(z, 0.0) if i < last else z
        return a[0] if single else a

    def backward(self, x: np.ndarray, upstream: np.ndarray) -> Grads:
        """Gradients of ``sum(upstream * forward(x))`` w.r.t. every parameter.

        ``upstream`` must match the output shape (vector for a vector input,
        matrix for a batch).  The rectifier subgradient at exactly zero is
        zero.  Returns one ``(dW, db)`` pair per layer.
        """
        x, single = self._check_input(x)
        upstream = np.asarray(upstream, dtype=np.float64)
        if single:
            upstream = upstream.reshape(1, -1)
        if upstream.shape != (x.shape[0], self.output_size):
            raise ValueError(
                f"upstream shape {upstream.shape} does not match output ({x.shape[0]}, {self.output_size})"
            )

        # forward with caches
        activations = [x]
        pre_acts = []
        a = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            pre_acts.append(z)
            a = np.maximum(z, 0.0) if i < last else z
            activations.append(a)

        grads: Grads = [None] * len(self.weights)  # type: ignore[list-item]
        delta = upstream
        for i in range(last, -1, -1):
            grads[i] = (activations[i].T @ delta, delta.sum(axis=0))
            if i > 0:
                delta = (delta @ self.weights[i].T) * (pre_acts[i - 1] > 0.0)
        return grads

    def parameters(self) -> List[np.ndarray]:
        """Live parameter arrays, interleaved ``[W0, b0, W1, b1, ...]``."""
        out: List[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def copy(self) -> "DenseNetwork":
        clone = DenseNetwork.__new__(DenseNetwork)
        clone.layer_sizes = self.layer_sizes
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone

    def save(self, path) -> None:
        """Snapshot to ``.npz``: a layer-size header plus per-layer arrays."""
        arrays = {"layer_sizes": np.asarray(self.layer_sizes, dtype=np.int64)}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            arrays[f"W{i}"] = w
            arrays[f"b{i}"] = b
        np.savez(path, **arrays)

    @classmethod
    def load(cls, path) -> "DenseNetwork":
        with np.load(path) as data:
            sizes = tuple(int(s) for s in data["layer_sizes"])
            net = cls.__new__(cls)
            net.layer_sizes = sizes
            net.weights = [data[f"W{i}"].astype(np.float64) for i in range(len(sizes) - 1)]
            net.biases = [data[f"b{i}"].astype(np.float64) for i in range(len(sizes) - 1)]
        return net


class Adam:
    """Adam optimizer state for a fixed list of parameter arrays.

    Standard bias-corrected moment recursion with decay rates ``beta1`` /
    ``beta2`` and stabilizer ``epsilon``.  ``clip_norm > 0`` enables a global
    max-norm clip on the gradient before the update (off by default).
    """

    def __init__(
        self,
        params: Sequence[np.ndarray],
        learning_rate: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
        clip_norm: float = 0.0,
    ):
        if not 0.0 < beta1 < 1.0 or not 0.0 < beta2 < 1.0:
            raise ValueError("Adam decay rates must lie in (0, 1)")
        self.learning_rate = float(learning_rate)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.epsilon = float(epsilon)
        self.clip_norm = float(clip_norm)
        self.step_count = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        """Apply one in-place update; raises on shape mismatch or non-finite grads."""
        if len(params) != len(self.m):
            raise ValueError(f"expected {len(self.m)} parameter arrays, got {len(params)}")
        for g, m in zip(grads, self.m):
            if g.shape != m.shape:
                raise ValueError(f"gradient shape {g.shape} does not match state {m.shape}")
            if not np.isfinite(g).all():
                raise NumericalFault("non-finite gradient passed to Adam")

        if self.clip_norm > 0.0:
            total = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
            if total > self.clip_norm:
                scale = self.clip_norm / total
                grads = [g * scale for g in grads]

        self.step_count += 1
        c1 = 1.0 - self.beta1 ** self.step_count
        c2 = 1.0 - self.beta2 ** self.step_count
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.learning_rate * (m / c1) / (np.sqrt(v / c2) + self.epsilon)
            if not np.isfinite(p).all():
                raise NumericalFault("parameters became non-finite after an Adam update")


def dueling_combine(value, advantages) -> np.ndarray:
    """Combine a state value and action advantages into action values.

    ``q_i = value + (advantages_i - mean(advantages))``.  Broadcasts over a
    leading batch dimension: ``value`` may be a scalar or shape ``(B,)`` /
    ``(B, 1)`` and ``advantages`` shape ``(A,)`` or ``(B, A)``.
    """
    adv = np.asarray(advantages, dtype=np.float64)
    if adv.size == 0:
        raise ValueError("advantages must be non-empty")
    val = np.asarray(value, dtype=np.float64)
    if adv.ndim == 1:
        return float(val) + (adv - adv.mean())
    val = val.reshape(adv.shape[0], 1)
    return val + (adv - adv.mean(axis=1, keepdims=True))


def soft_update(target_params: Sequence[np.ndarray], local_params: Sequence[np.ndarray], tau: float) -> None:
    """Blend local parameters into the target set in place.

    ``target <- tau * local + (1 - tau) * target`` elementwise.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    if len(target_params) != len(local_params):
        raise ValueError("parameter lists differ in length")
    for t, l in zip(target_params, local_params):
        if t.shape != l.shape:
            raise ValueError(f"shape mismatch {t.shape} vs {l.shape}")
        t *= 1.0 - tau
        t += tau * l
