"""Value-learning agent over the discrete grid of lower-bound proportions.

A dueling network (shared relu trunk, scalar value head plus one advantage
per action, combined with mean-centered advantages) scores each proportion
for the current feature window.  Actions are epsilon-greedy; transitions go
to a plain FIFO buffer sampled uniformly; learning minimizes the squared
one-step TD error against a softly-updated target copy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import AdamParams, AgentParams
from .errors import NumericalFault
from .nets import Adam, DenseNetwork, dueling_combine, soft_update
from .validation import check_unit_open

__all__ = ["ActionSpace", "action_space", "Transition", "EpsilonSchedule", "DuelingAgent"]


@dataclass(frozen=True)
class ActionSpace:
    """The selectable lower-bound proportions for a given miss probability."""

    n_actions: int
    beta: float
    proportions: tuple[float, ...]

    @property
    def middle_index(self) -> int:
        return (self.n_actions - 1) // 2


def action_space(n_actions: int, beta: float) -> ActionSpace:
    """Evenly spaced proportions ``(i+1) * beta / (n_actions+1)`` for i < n_actions.

    ``n_actions`` must be of the form ``2**n - 1``, which keeps the grid
    symmetric around ``beta / 2`` (the central pair); larger grids refine
    smaller ones.
    """
    n_actions = int(n_actions)
    if n_actions < 1 or (n_actions + 1) & n_actions:
        raise ValueError(f"n_actions must be 2**n - 1 for some n >= 1, got {n_actions}")
    beta = check_unit_open("beta", beta)
    props = tuple((i + 1) * beta / (n_actions + 1) for i in range(n_actions))
    return ActionSpace(n_actions=n_actions, beta=beta, proportions=props)


@dataclass(frozen=True)
class Transition:
    """Agent experience: the stream never terminates, so no done flag exists."""

    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray


class EpsilonSchedule:
    """Exponential decay from ``start`` down to a ``end`` floor.

    The per-call factor is chosen so the floor is reached after
    ``decay_steps`` calls.
    """

    def __init__(self, start: float = 1.0, end: float = 0.01, decay_steps: int = 10_000):
        if not 0.0 <= end <= start <= 1.0:
            raise ValueError(f"need 0 <= end <= start <= 1, got start={start} end={end}")
        self.start = float(start)
        self.end = float(end)
        self.decay_steps = max(1, int(decay_steps))
        self._calls = 0

    @property
    def value(self) -> float:
        """The epsilon the next call will use."""
        if self.start == 0.0:
            return 0.0
        if self.end == 0.0:
            # pure exponential decay has no zero floor; treat end=0 as "decay forever"
            factor = (1e-12 / self.start) ** (1.0 / self.decay_steps)
            return self.start * factor**self._calls
        factor = (self.end / self.start) ** (1.0 / self.decay_steps)
        return max(self.end, self.start * factor**self._calls)

    def tick(self) -> float:
        """Return the current value and advance the schedule one call."""
        val = self.value
        self._calls += 1
        return val


class _TransitionBuffer:
    """Fixed-capacity FIFO transition store with uniform sampling."""

    def __init__(self, capacity: int, state_dim: int, rng: np.random.Generator):
        self.capacity = int(capacity)
        self._states = np.zeros((self.capacity, state_dim))
        self._actions = np.zeros(self.capacity, dtype=np.int64)
        self._rewards = np.zeros(self.capacity)
        self._next_states = np.zeros((self.capacity, state_dim))
        self._size = 0
        self._head = 0
        self._rng = rng

    def __len__(self) -> int:
        return self._size

    def push(self, state, action, reward, next_state) -> None:
        self._states[self._head] = state
        self._actions[self._head] = action
        self._rewards[self._head] = reward
        self._next_states[self._head] = next_state
        self._head = (self._head + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int):
        idx = self._rng.integers(0, self._size, size=batch_size)
        return (self._states[idx], self._actions[idx], self._rewards[idx], self._next_states[idx])


class DuelingAgent:
    """Epsilon-greedy proportion selector learning from uniform replay."""

    def __init__(
        self,
        space: ActionSpace,
        window: int,
        params: AgentParams | None = None,
        adam: AdamParams | None = None,
        seed_seqs: tuple | None = None,
    ):
        self.space = space
        self.window = int(window)
        self.params = params if params is not None else AgentParams()
        adam = adam if adam is not None else AdamParams()
        if seed_seqs is None:
            seed_seqs = np.random.SeedSequence().spawn(3)
        init_seq, action_seq, replay_seq = seed_seqs

        # output = [state value, advantage per action]
        sizes = (self.window, *self.params.hidden_layers, 1 + space.n_actions)
        self.local = DenseNetwork(sizes, rng=np.random.default_rng(init_seq))
        self.target = self.local.copy()
        self.adam = Adam(
            self.local.parameters(),
            learning_rate=self.params.learning_rate,
            beta1=adam.beta1,
            beta2=adam.beta2,
            epsilon=adam.epsilon,
        )
        decay = self.params.epsilon_decay_steps if self.params.epsilon_decay_steps is not None else 10_000
        self.schedule = EpsilonSchedule(self.params.epsilon_start, self.params.epsilon_end, decay)
        self._action_rng = np.random.default_rng(action_seq)
        self.buffer = _TransitionBuffer(
            self.params.buffer_capacity, self.window, np.random.default_rng(replay_seq)
        )

    @property
    def epsilon(self) -> float:
        return self.schedule.value

    def q_values(self, x: np.ndarray, use_target: bool = False) -> np.ndarray:
        """Action values for one window (or a batch of windows)."""
        net = self.target if use_target else self.local
        out = net.forward(np.asarray(x, dtype=np.float64))
        if out.ndim == 1:
            return dueling_combine(out[0], out[1:])
        return dueling_combine(out[:, 0], out[:, 1:])

    def select_action(self, x: np.ndarray) -> tuple[int, float]:
        """Pick an action index and its proportion; decays epsilon afterwards.

        With probability epsilon the index is uniform-random; otherwise it is
        the argmax action value, ties broken toward the lowest index.
        """
        eps = self.schedule.tick()
        if self._action_rng.random() < eps:
            idx = int(self._action_rng.integers(self.space.n_actions))
        else:
            idx = int(np.argmax(self.q_values(x)))
        return idx, self.space.proportions[idx]

    def greedy_action(self, x: np.ndarray) -> tuple[int, float]:
        """Pure argmax selection; consumes no randomness, leaves epsilon alone."""
        idx = int(np.argmax(self.q_values(x)))
        return idx, self.space.proportions[idx]

    def store_transition(self, state, action, reward, next_state) -> None:
        self.buffer.push(state, action, reward, next_state)

    def learn(self) -> float | None:
        """One TD step on a uniform minibatch; ``None`` while data is short.

        Targets bootstrap through the (untouched) target network:
        ``y = r + gamma * max_a Q_target(next_state, a)``.
        """
        if len(self.buffer) < self.params.batch_size:
            return None
        states, actions, rewards, next_states = self.buffer.sample(self.params.batch_size)
        q_next = self.q_values(next_states, use_target=True)
        targets = rewards + self.params.gamma * q_next.max(axis=1)

        out = self.local.forward(states)
        q_local = dueling_combine(out[:, 0], out[:, 1:])
        b = len(actions)
        rows = np.arange(b)
        td = q_local[rows, actions] - targets
        loss = float(np.mean(td**2))
        if not np.isfinite(loss):
            raise NumericalFault(f"non-finite TD loss (reward range [{rewards.min()}, {rewards.max()}])")

        # dQ_a/dV = 1; dQ_a/dA_k = 1{k=a} - 1/|A|
        g = (2.0 / b) * td
        n_act = self.space.n_actions
        upstream = np.zeros_like(out)
        upstream[:, 0] = g
        upstream[:, 1:] = (-1.0 / n_act) * g[:, None]
        upstream[rows, 1 + actions] += g
        grads = self.local.backward(states, upstream)
        flat = [arr for pair in grads for arr in pair]
        self.adam.step(self.local.parameters(), flat)
        return loss

    def sync_target(self) -> None:
        """Soft-blend local parameters into the target copy."""
        soft_update(self.target.parameters(), self.local.parameters(), self.params.tau)

    def save(self, path) -> None:
        arrays = {
            "layer_sizes": np.asarray(self.local.layer_sizes, dtype=np.int64),
            "epsilon_calls": np.asarray(self.schedule._calls, dtype=np.int64),
            "adam_steps": np.asarray(self.adam.step_count, dtype=np.int64),
        }
        for i, (w, b) in enumerate(zip(self.local.weights, self.local.biases)):
            arrays[f"W{i}"] = w
            arrays[f"b{i}"] = b
        for i, (w, b) in enumerate(zip(self.target.weights, self.target.biases)):
            arrays[f"tW{i}"] = w
            arrays[f"tb{i}"] = b
        for i, (m, v) in enumerate(zip(self.adam.m, self.adam.v)):
            arrays[f"m{i}"] = m
            arrays[f"v{i}"] = v
        np.savez(path, **arrays)

    def restore(self, path) -> None:
        with np.load(path) as data:
            sizes = tuple(int(s) for s in data["layer_sizes"])
            if sizes != self.local.layer_sizes:
                raise ValueError(f"snapshot layer sizes {sizes} do not match {self.local.layer_sizes}")
            for i in range(len(sizes) - 1):
                self.local.weights[i][...] = data[f"W{i}"]
                self.local.biases[i][...] = data[f"b{i}"]
                self.target.weights[i][...] = data[f"tW{i}"]
                self.target.biases[i][...] = data[f"tb{i}"]
            for i in range(len(self.adam.m)):
                self.adam.m[i][...] = data[f"m{i}"]
                self.adam.v[i][...] = data[f"v{i}"]
            self.adam.step_count = int(data["adam_steps"])
            self.schedule._calls = int(data["epsilon_calls"])
