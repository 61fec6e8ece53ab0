"""The closed-loop online run plus its comparison baselines.

Each step: the policy picks a lower-bound proportion for the current feature
window, the paired predictors emit bounds, the truth is revealed, crossed
bounds are repaired, the Winkler score and reward are computed, the two
selected predictors replay-update, and the agent (when present) stores the
transition, learns from uniform replay and soft-updates its target copy.

Baselines share the identical loop: the central-interval arm replaces the
agent with a fixed middle-proportion policy, the frozen arm stops all
learning after a training prefix, and the hour-of-day arm applies fixed
per-hour empirical quantiles from the training portion.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .agent import ActionSpace, DuelingAgent, EpsilonSchedule, action_space
from .config import EngineConfig
from .data import make_window, split
from .errors import NumericalFault
from .metrics import IntervalForecast, reward, winkler_score
from .quantile import PredictorBank, make_predictor_bank
from .validation import check_series, check_unit_open

__all__ = [
    "StepRecord",
    "EngineRun",
    "repair_crossing",
    "run_online",
    "run_online_cpi",
    "run_naive_baseline",
    "run_frozen",
    "fit_online",
    "strip_warmup",
]


@dataclass(frozen=True)
class StepRecord:
    """Everything observable about one forecasting step."""

    step: int
    proportion: float
    lower: float
    upper: float
    raw_lower: float
    raw_upper: float
    y: float
    winkler: float
    reward: float
    crossed: bool
    epsilon: float
    warmup: bool


def repair_crossing(raw_lower: float, raw_upper: float) -> tuple[float, float, bool]:
    """Collapse crossed bounds to their midpoint instead of swapping them.

    Swapping would reward a pathological predictor pair with spurious width;
    the zero-width interval keeps the Winkler score well defined and the
    crossing observable.
    """
    if raw_lower <= raw_upper:
        return raw_lower, raw_upper, False
    mid = 0.5 * (raw_lower + raw_upper)
    return mid, mid, True


def strip_warmup(records: Sequence[StepRecord]) -> List[StepRecord]:
    """Drop records emitted while a selected predictor still lacked a full batch."""
    return [r for r in records if not r.warmup]


class _AgentPolicy:
    """Adaptive proportion selection through the dueling agent."""

    def __init__(self, agent: DuelingAgent):
        self.agent = agent

    def select(self, x: np.ndarray) -> tuple[int, float, float]:
        eps = self.agent.epsilon
        idx, prop = self.agent.select_action(x)
        return idx, prop, eps

    def select_greedy(self, x: np.ndarray) -> tuple[int, float, float]:
        idx, prop = self.agent.greedy_action(x)
        return idx, prop, 0.0

    def update(self, state, action, rew, next_state) -> None:
        self.agent.store_transition(state, action, rew, next_state)
        self.agent.learn()
        self.agent.sync_target()


class _FixedPolicy:
    """Always the central proportion; keeps the epsilon schedule ticking so
    traces line up with the adaptive arm under matched seeds."""

    def __init__(self, space: ActionSpace, schedule: EpsilonSchedule):
        self.space = space
        self.schedule = schedule
        self._idx = space.middle_index

    def select(self, x: np.ndarray) -> tuple[int, float, float]:
        eps = self.schedule.tick()
        return self._idx, self.space.proportions[self._idx], eps

    def select_greedy(self, x: np.ndarray) -> tuple[int, float, float]:
        return self._idx, self.space.proportions[self._idx], 0.0

    def update(self, state, action, rew, next_state) -> None:
        pass


@dataclass
class EngineRun:
    """A finished (or freezable) run: the trace plus the fitted pieces."""

    records: List[StepRecord]
    bank: PredictorBank
    policy: object
    space: ActionSpace
    config: EngineConfig

    def predict_interval(self, x: np.ndarray) -> tuple[float, float, bool]:
        """Frozen greedy bounds for one feature window."""
        xs = _scale_window(np.asarray(x, dtype=np.float64), self.config.feature_scaling)
        idx, _, _ = self.policy.select_greedy(xs)
        low, up = self.bank.pair(idx)
        return repair_crossing(low.predict(xs), up.predict(xs))


def _scale_window(x: np.ndarray, mode: str) -> np.ndarray:
    if mode == "none":
        return x
    lo, hi = x.min(), x.max()
    if hi <= lo:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def _prepared_config(cfg: EngineConfig, n_steps: int) -> EngineConfig:
    """Deep copy with the epsilon decay horizon resolved from the run length."""
    cfg = copy.deepcopy(cfg).validate()
    if cfg.agent.epsilon_decay_steps is None:
        cfg.agent.epsilon_decay_steps = max(1, int(0.2 * n_steps))
    return cfg


def _min_series_length(cfg: EngineConfig) -> int:
    return cfg.window + cfg.predictor.batch_size + 1


def _run_loop(
    series: np.ndarray,
    cfg: EngineConfig,
    bank: PredictorBank,
    policy,
    start: int,
    stop: int,
    learn: bool,
    records: List[StepRecord],
) -> None:
    h = cfg.window
    beta = cfg.beta
    scaling = cfg.feature_scaling
    for t in range(start, stop):
        x = _scale_window(make_window(series, t, h), scaling)
        if learn:
            idx, prop, eps = policy.select(x)
        else:
            idx, prop, eps = policy.select_greedy(x)
        low_pred, up_pred = bank.pair(idx)
        raw_lower = low_pred.predict(x)
        raw_upper = up_pred.predict(x)
        if not (np.isfinite(raw_lower) and np.isfinite(raw_upper)):
            raise NumericalFault(f"step {t}: non-finite bounds ({raw_lower}, {raw_upper})")
        lower, upper, crossed = repair_crossing(raw_lower, raw_upper)
        y = float(series[t])
        wink = winkler_score(y, IntervalForecast(lower, upper, beta))
        rew = reward(wink)
        warmup = False
        if learn:
            low_report = low_pred.observe_and_update(x, y)
            up_report = up_pred.observe_and_update(x, y)
            warmup = low_report is None or up_report is None
            next_x = _scale_window(make_window(series, t + 1, h), scaling)
            policy.update(x, idx, rew, next_x)
        records.append(
            StepRecord(
                step=t,
                proportion=prop,
                lower=lower,
                upper=upper,
                raw_lower=raw_lower,
                raw_upper=raw_upper,
                y=y,
                winkler=wink,
                reward=rew,
                crossed=crossed,
                epsilon=eps,
                warmup=warmup,
            )
        )


def fit_online(series, cfg: EngineConfig, stop: int | None = None) -> EngineRun:
    """Run the adaptive engine over ``series`` (up to ``stop``), keeping state.

    Seed streams are derived per component in a fixed order, so a one-action
    run and the fixed-proportion arm see bit-identical predictor randomness.
    """
    cfg_in = cfg
    series = check_series(series, min_length=_min_series_length(cfg_in))
    stop = len(series) if stop is None else int(stop)
    cfg = _prepared_config(cfg_in, len(series) - cfg_in.window)

    space = action_space(cfg.n_actions, cfg.beta)
    children = np.random.SeedSequence(cfg.seed).spawn(3 + 2 * space.n_actions)
    agent = DuelingAgent(
        space, cfg.window, params=cfg.agent, adam=cfg.adam, seed_seqs=tuple(children[:3])
    )
    bank = make_predictor_bank(
        space.proportions,
        beta=cfg.beta,
        window=cfg.window,
        params=cfg.predictor,
        per=cfg.per,
        adam=cfg.adam,
        seed_seqs=children[3:],
    )
    policy = _AgentPolicy(agent)
    records: List[StepRecord] = []
    _run_loop(series, cfg, bank, policy, cfg.window, stop, learn=True, records=records)
    return EngineRun(records=records, bank=bank, policy=policy, space=space, config=cfg)


def run_online(series, cfg: EngineConfig) -> List[StepRecord]:
    """Adaptive-proportion online run over the full series."""
    return fit_online(series, cfg).records


def fit_online_cpi(series, cfg: EngineConfig, stop: int | None = None) -> EngineRun:
    """Central-interval arm: the agent is bypassed, only the middle pair exists."""
    cfg_in = cfg
    series = check_series(series, min_length=_min_series_length(cfg_in))
    stop = len(series) if stop is None else int(stop)
    cfg = _prepared_config(cfg_in, len(series) - cfg_in.window)

    space = action_space(1, cfg.beta)
    children = np.random.SeedSequence(cfg.seed).spawn(3 + 2)
    bank = make_predictor_bank(
        space.proportions,
        beta=cfg.beta,
        window=cfg.window,
        params=cfg.predictor,
        per=cfg.per,
        adam=cfg.adam,
        seed_seqs=children[3:],
    )
    schedule = EpsilonSchedule(
        cfg.agent.epsilon_start, cfg.agent.epsilon_end, cfg.agent.epsilon_decay_steps
    )
    policy = _FixedPolicy(space, schedule)
    records: List[StepRecord] = []
    _run_loop(series, cfg, bank, policy, cfg.window, stop, learn=True, records=records)
    return EngineRun(records=records, bank=bank, policy=policy, space=space, config=cfg)


def run_online_cpi(series, cfg: EngineConfig) -> List[StepRecord]:
    """Online central-interval run (fixed proportion ``beta / 2``)."""
    return fit_online_cpi(series, cfg).records


def run_frozen(series, cfg: EngineConfig, train_fraction: float | None = None) -> List[StepRecord]:
    """Learn online over the training prefix, then freeze and score the rest.

    During the frozen phase nothing updates and selection is pure argmax;
    only test-portion records are returned.
    """
    series = check_series(series)
    frac = cfg.train_fraction if train_fraction is None else train_fraction
    check_unit_open("train_fraction", frac)
    train, test = split(series, frac, min_segment=1)
    cut = len(train)
    if cut < _min_series_length(cfg):
        raise ValueError(
            f"training portion ({cut}) shorter than window + batch ({_min_series_length(cfg)})"
        )
    if len(test) < 1:
        raise ValueError("empty test portion")

    run = fit_online(series, cfg, stop=cut)
    frozen_records: List[StepRecord] = []
    _run_loop(series, run.config, run.bank, run.policy, cut, len(series), learn=False, records=frozen_records)
    return frozen_records


def run_naive_baseline(series, cfg: EngineConfig, train_fraction: float | None = None) -> List[StepRecord]:
    """Hour-of-day empirical-quantile intervals fitted on the training portion.

    For each hour ``t % 24`` the training values at that hour supply fixed
    ``beta/2`` and ``1 - beta/2`` quantiles (linear interpolation of order
    statistics at positions ``(n + 1) * q``), applied to every test step.
    """
    series = check_series(series)
    cfg.validate()
    frac = cfg.train_fraction if train_fraction is None else train_fraction
    check_unit_open("train_fraction", frac)
    train, _ = split(series, frac, min_segment=1)
    cut = len(train)
    beta = cfg.beta

    lower_by_hour = np.zeros(24)
    upper_by_hour = np.zeros(24)
    for hour in range(24):
        vals = train[hour::24]
        if len(vals) < 10:
            raise ValueError(f"hour {hour} has only {len(vals)} training samples (need >= 10)")
        lower_by_hour[hour] = np.quantile(vals, beta / 2.0, method="weibull")
        upper_by_hour[hour] = np.quantile(vals, 1.0 - beta / 2.0, method="weibull")

    records: List[StepRecord] = []
    for t in range(cut, len(series)):
        hour = t % 24
        lower = float(lower_by_hour[hour])
        upper = float(upper_by_hour[hour])
        y = float(series[t])
        wink = winkler_score(y, IntervalForecast(lower, upper, beta))
        records.append(
            StepRecord(
                step=t,
                proportion=beta / 2.0,
                lower=lower,
                upper=upper,
                raw_lower=lower,
                raw_upper=upper,
                y=y,
                winkler=wink,
                reward=reward(wink),
                crossed=False,
                epsilon=0.0,
                warmup=False,
            )
        )
    return records
