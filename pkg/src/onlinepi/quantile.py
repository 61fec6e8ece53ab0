"""Online quantile predictors updated from prioritized replay batches.

Each predictor owns one fixed probability proportion, a small dense network,
its Adam state and a prioritized buffer.  On every observation the new
(window, target) pair is stored at maximal priority; once the buffer holds a
full batch, one gradient step is taken on the IS-weighted pinball loss of a
prioritized sample, and the sampled entries' priorities are reset to their
fresh losses.
"""

from __future__ import annotations

from typing import Iterator, List, Sequence

import numpy as np

from .config import AdamParams, PerParams, PredictorParams
from .errors import NumericalFault
from .nets import Adam, DenseNetwork
from .replay import PrioritizedBuffer
from .validation import check_unit_open

__all__ = ["QuantilePredictor", "PredictorBank", "make_predictor_bank"]


class QuantilePredictor:
    """One online quantile-regression network bound to a fixed proportion."""

    def __init__(
        self,
        alpha: float,
        window: int,
        params: PredictorParams | None = None,
        per: PerParams | None = None,
        adam: AdamParams | None = None,
        seed_seq: np.random.SeedSequence | int | None = None,
    ):
        self._alpha = check_unit_open("alpha", alpha)
        self.window = int(window)
        self.params = params if params is not None else PredictorParams()
        per = per if per is not None else PerParams()
        adam = adam if adam is not None else AdamParams()
        if not isinstance(seed_seq, np.random.SeedSequence):
            seed_seq = np.random.SeedSequence(seed_seq)
        init_seq, buffer_seq = seed_seq.spawn(2)

        self.net = DenseNetwork(
            (self.window, *self.params.hidden_layers, 1),
            rng=np.random.default_rng(init_seq),
        )
        self.adam = Adam(
            self.net.parameters(),
            learning_rate=self.params.learning_rate,
            beta1=adam.beta1,
            beta2=adam.beta2,
            epsilon=adam.epsilon,
            clip_norm=self.params.grad_clip,
        )
        self.buffer = PrioritizedBuffer(
            capacity=self.params.buffer_capacity,
            feature_dim=self.window,
            sigma=per.sigma,
            rho_start=per.rho_start,
            rho_end=per.rho_end,
            rho_anneal_steps=per.rho_anneal_steps,
            priority_floor=per.priority_floor,
            rng=np.random.default_rng(buffer_seq),
        )

    @property
    def alpha(self) -> float:
        """The fixed probability proportion; immutable after construction."""
        return self._alpha

    @property
    def batch_size(self) -> int:
        return self.params.batch_size

    def predict(self, x: np.ndarray) -> float:
        """Quantile estimate for one feature window, using current parameters."""
        out = self.net.forward(np.asarray(x, dtype=np.float64))
        return float(out[0])

    def _batch_losses(self, q: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        d = q - y
        losses = np.where(d >= 0.0, (1.0 - self._alpha) * d, self._alpha * (-d))
        grads = np.where(d >= 0.0, 1.0 - self._alpha, -self._alpha)
        return losses, grads

    def observe_and_update(self, x: np.ndarray, y: float) -> float | None:
        """Store the new experience and take one replay gradient step.

        Returns the weighted batch loss, or ``None`` when the buffer does not
        yet hold a full batch (the update is skipped).
        """
        self.buffer.insert(np.asarray(x, dtype=np.float64), float(y))
        if len(self.buffer) < self.batch_size:
            return None

        indices, weights = self.buffer.sample(self.batch_size)
        feats = self.buffer.features_at(indices)
        targets = self.buffer.targets_at(indices)
        preds = self.net.forward(feats)[:, 0]
        losses, loss_grads = self._batch_losses(preds, targets)

        b = self.batch_size
        if self.params.squared_loss:
            batch_loss = float(np.mean(weights * losses**2))
            upstream = (2.0 / b) * weights * losses * loss_grads
        else:
            batch_loss = float(np.mean(weights * losses))
            upstream = (1.0 / b) * weights * loss_grads
        if not np.isfinite(batch_loss):
            raise NumericalFault(
                "non-finite replay loss for proportion "
                f"{self._alpha}: preds range [{preds.min()}, {preds.max()}], "
                f"targets range [{targets.min()}, {targets.max()}], "
                f"weights range [{weights.min()}, {weights.max()}]"
            )

        grads = self.net.backward(feats, upstream.reshape(-1, 1))
        flat = [g for pair in grads for g in pair]
        self.adam.step(self.net.parameters(), flat)
        self.buffer.update_priorities(indices, losses)
        return batch_loss

    def save_arrays(self, prefix: str, include_buffer: bool = False) -> dict:
        """Arrays for an ``.npz`` snapshot, keyed under ``prefix``."""
        arrays = {
            f"{prefix}_alpha": np.asarray(self._alpha),
            f"{prefix}_layer_sizes": np.asarray(self.net.layer_sizes, dtype=np.int64),
            f"{prefix}_adam_steps": np.asarray(self.adam.step_count, dtype=np.int64),
        }
        for i, (w, b) in enumerate(zip(self.net.weights, self.net.biases)):
            arrays[f"{prefix}_W{i}"] = w
            arrays[f"{prefix}_b{i}"] = b
        for i, (m, v) in enumerate(zip(self.adam.m, self.adam.v)):
            arrays[f"{prefix}_m{i}"] = m
            arrays[f"{prefix}_v{i}"] = v
        if include_buffer:
            n = len(self.buffer)
            idx = np.arange(n)
            arrays[f"{prefix}_buf_features"] = self.buffer.features_at(idx)
            arrays[f"{prefix}_buf_targets"] = self.buffer.targets_at(idx)
            arrays[f"{prefix}_buf_priorities"] = self.buffer.priorities()
        return arrays

    def restore_arrays(self, prefix: str, data) -> None:
        """Restore parameters and optimizer state from snapshot arrays.

        Buffer contents are re-inserted in slot order when present; replay
        RNG streams restart from the construction seed.
        """
        sizes = tuple(int(s) for s in data[f"{prefix}_layer_sizes"])
        if sizes != self.net.layer_sizes:
            raise ValueError(f"snapshot layer sizes {sizes} do not match {self.net.layer_sizes}")
        for i in range(len(sizes) - 1):
            self.net.weights[i][...] = data[f"{prefix}_W{i}"]
            self.net.biases[i][...] = data[f"{prefix}_b{i}"]
        for i in range(len(self.adam.m)):
            self.adam.m[i][...] = data[f"{prefix}_m{i}"]
            self.adam.v[i][...] = data[f"{prefix}_v{i}"]
        self.adam.step_count = int(data[f"{prefix}_adam_steps"])
        if f"{prefix}_buf_features" in data:
            feats = data[f"{prefix}_buf_features"]
            targets = data[f"{prefix}_buf_targets"]
            priorities = data[f"{prefix}_buf_priorities"]
            for row, target in zip(feats, targets):
                self.buffer.insert(row, float(target))
            self.buffer.update_priorities(np.arange(len(priorities)), priorities)


class PredictorBank:
    """The paired lower/upper predictors for every selectable proportion."""

    def __init__(self, lowers: List[QuantilePredictor], uppers: List[QuantilePredictor], beta: float):
        self.lowers = lowers
        self.uppers = uppers
        self.beta = beta

    @property
    def proportions(self) -> tuple[float, ...]:
        return tuple(p.alpha for p in self.lowers)

    def pair(self, action_index: int) -> tuple[QuantilePredictor, QuantilePredictor]:
        return self.lowers[action_index], self.uppers[action_index]

    def __iter__(self) -> Iterator[QuantilePredictor]:
        yield from self.lowers
        yield from self.uppers

    def __len__(self) -> int:
        return len(self.lowers) + len(self.uppers)

    def save(self, path, include_buffers: bool = False) -> None:
        arrays = {
            "proportions": np.asarray(self.proportions),
            "beta": np.asarray(self.beta),
        }
        for k, pred in enumerate(self):
            arrays.update(pred.save_arrays(f"p{k}", include_buffer=include_buffers))
        np.savez(path, **arrays)

    def restore(self, path) -> None:
        with np.load(path) as data:
            stored = tuple(float(p) for p in data["proportions"])
            if stored != self.proportions:
                raise ValueError(f"snapshot proportions {stored} do not match {self.proportions}")
            for k, pred in enumerate(self):
                pred.restore_arrays(f"p{k}", data)


def make_predictor_bank(
    proportions: Sequence[float],
    beta: float,
    window: int,
    params: PredictorParams | None = None,
    per: PerParams | None = None,
    adam: AdamParams | None = None,
    seed_seqs: Sequence[np.random.SeedSequence] | None = None,
) -> PredictorBank:
    """Build one lower and one upper predictor per proportion.

    A proportion ``a`` pairs with ``a + 1 - beta``; each of the ``2 * len
    (proportions)`` predictors gets its own independent network, optimizer
    state and buffer.  ``seed_seqs``, when given, must supply one seed per
    predictor in (lowers..., uppers...) order.
    """
    beta = check_unit_open("beta", beta)
    lows = [check_unit_open("proportion", p) for p in proportions]
    ups = [p + 1.0 - beta for p in lows]
    combined = lows + ups
    if len(set(combined)) != len(combined):
        raise ValueError(f"duplicate proportions in {combined}")
    if seed_seqs is None:
        seed_seqs = np.random.SeedSequence().spawn(len(combined))
    if len(seed_seqs) != len(combined):
        raise ValueError(f"need {len(combined)} seeds, got {len(seed_seqs)}")

    predictors = [
        QuantilePredictor(a, window, params=params, per=per, adam=adam, seed_seq=s)
        for a, s in zip(combined, seed_seqs)
    ]
    n = len(lows)
    return PredictorBank(predictors[:n], predictors[n:], beta)
