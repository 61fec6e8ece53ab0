"""Prioritized experience replay for the online quantile predictors.

Storage is a fixed-capacity ring (oldest-first eviction).  Sampling is
proportional to ``priority ** sigma``; importance-sampling weights
``(N * P_j) ** -rho`` are normalized by the maximum raw weight over the
whole buffer, so every weight lands in (0, 1].  ``rho`` anneals linearly
toward full correction over a configurable number of sample calls.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Experience", "PrioritizedBuffer"]


@dataclass(frozen=True)
class Experience:
    """One stored (feature window, target) pair with its replay priority."""

    features: np.ndarray
    target: float
    priority: float
    insert_step: int


class PrioritizedBuffer:
    def __init__(
        self,
        capacity: int,
        feature_dim: int,
        sigma: float = 0.6,
        rho_start: float = 0.4,
        rho_end: float = 1.0,
        rho_anneal_steps: int = 10_000,
        priority_floor: float = 1e-6,
        rng: np.random.Generator | None = None,
    ):
        if capacity <= 0:
            raise ValueError(f"capacity must be positive, got {capacity}")
        if sigma < 0.0:
            raise ValueError(f"sigma must be >= 0, got {sigma}")
        if not 0.0 <= rho_start <= 1.0 or not 0.0 <= rho_end <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        if priority_floor <= 0.0:
            raise ValueError("priority floor must be positive")
        self.capacity = int(capacity)
        self.feature_dim = int(feature_dim)
        self.sigma = float(sigma)
        self.rho_start = float(rho_start)
        self.rho_end = float(rho_end)
        self.rho_anneal_steps = int(rho_anneal_steps)
        self.priority_floor = float(priority_floor)
        self._rng = rng if rng is not None else np.random.default_rng()

        self._features = np.zeros((self.capacity, self.feature_dim))
        self._targets = np.zeros(self.capacity)
        self._priorities = np.zeros(self.capacity)
        self._insert_steps = np.zeros(self.capacity, dtype=np.int64)
        self._size = 0
        self._head = 0  # next slot to write; wraps over the oldest entry
        self._inserts = 0
        self._sample_calls = 0

    def __len__(self) -> int:
        return self._size

    @property
    def rho(self) -> float:
        """Current importance-sampling exponent under the linear anneal."""
        if self.rho_anneal_steps <= 0:
            return self.rho_end
        frac = min(1.0, self._sample_calls / self.rho_anneal_steps)
        return self.rho_start + (self.rho_end - self.rho_start) * frac

    def insert(self, features: np.ndarray, target: float) -> None:
        """Store a new experience at the running maximum priority.

        An empty buffer assigns priority 1.0.  At capacity the oldest entry
        is overwritten.
        """
        features = np.asarray(features, dtype=np.float64)
        if features.shape != (self.feature_dim,):
            raise ValueError(f"expected features of shape ({self.feature_dim},), got {features.shape}")
        priority = float(self._priorities[: self._size].max()) if self._size else 1.0
        self._features[self._head] = features
        self._targets[self._head] = float(target)
        self._priorities[self._head] = priority
        self._insert_steps[self._head] = self._inserts
        self._inserts += 1
        self._head = (self._head + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def probabilities(self) -> np.ndarray:
        """Sampling distribution over live entries: ``p^sigma`` normalized."""
        if self._size == 0:
            raise ValueError("buffer is empty")
        scaled = self._priorities[: self._size] ** self.sigma
        return scaled / scaled.sum()

    def sample(self, batch_size: int) -> tuple[np.ndarray, np.ndarray]:
        """Draw ``batch_size`` indices with replacement plus normalized IS weights.

        Raises ``ValueError`` when fewer than ``batch_size`` experiences are
        stored; the caller is expected to skip its update in that case.
        Advances the ``rho`` anneal by one call.
        """
        if self._size < batch_size:
            raise ValueError(f"insufficient data: buffer holds {self._size} < batch {batch_size}")
        probs = self.probabilities()
        rho = self.rho
        self._sample_calls += 1
        indices = self._rng.choice(self._size, size=batch_size, replace=True, p=probs)
        if rho == 0.0:
            return indices, np.ones(batch_size)
        # normalize by the max raw weight over the whole buffer (the entry
        # with the smallest sampling probability)
        raw = (self._size * probs[indices]) ** (-rho)
        w_max = (self._size * probs.min()) ** (-rho)
        return indices, raw / w_max

    def update_priorities(self, indices: np.ndarray, losses: np.ndarray) -> None:
        """Set sampled entries' priorities to their losses, floored."""
        indices = np.asarray(indices, dtype=np.int64)
        losses = np.asarray(losses, dtype=np.float64)
        if indices.shape != losses.shape:
            raise ValueError("indices and losses must have matching shapes")
        if indices.size and (indices.min() < 0 or indices.max() >= self._size):
            raise ValueError("index out of range")
        if losses.size and losses.min() < 0.0:
            raise ValueError("losses must be non-negative")
        self._priorities[indices] = np.maximum(losses, self.priority_floor)

    def features_at(self, indices: np.ndarray) -> np.ndarray:
        return self._features[indices]

    def targets_at(self, indices: np.ndarray) -> np.ndarray:
        return self._targets[indices]

    def priorities(self) -> np.ndarray:
        """Copy of the live priorities, oldest slot order."""
        return self._priorities[: self._size].copy()

    def experience_at(self, index: int) -> Experience:
        if not 0 <= index < self._size:
            raise ValueError("index out of range")
        return Experience(
            features=self._features[index].copy(),
            target=float(self._targets[index]),
            priority=float(self._priorities[index]),
            insert_step=int(self._insert_steps[index]),
        )
