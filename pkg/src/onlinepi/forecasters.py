"""Scikit-learn-style front ends for the online interval engines.

``fit(y)`` consumes a univariate series and performs the full online run;
the per-step trace lands in ``records_`` and ``predict(X)`` serves frozen
interval forecasts for explicit feature windows afterwards.  The estimators
carry plain constructor params, so ``get_params`` / ``set_params`` / ``clone``
compose with the wider ecosystem.
"""

from __future__ import annotations

import copy

import numpy as np
from sklearn.base import BaseEstimator

from .config import EngineConfig
from .engine import EngineRun, fit_online, fit_online_cpi, strip_warmup
from .metrics import ScoreReport, score_trace
from .validation import check_series, check_unit_open, check_window_matrix

__all__ = [
    "AdaptiveIntervalForecaster",
    "CentralIntervalForecaster",
    "HourOfDayBaseline",
]


class _EngineBackedForecaster(BaseEstimator):
    """Shared plumbing: config assembly, frozen prediction, trace scoring."""

    def _build_config(self) -> EngineConfig:
        cfg = copy.deepcopy(self.config) if self.config is not None else EngineConfig()
        cfg.beta = self.beta
        cfg.window = self.window
        cfg.seed = self.seed
        return cfg

    def _fit_run(self, series: np.ndarray) -> EngineRun:
        raise NotImplementedError

    def fit(self, y):
        """Run the online loop over the series ``y``."""
        series = check_series(y)
        run = self._fit_run(series)
        self.run_ = run
        self.records_ = run.records
        self.config_ = run.config
        return self

    def predict(self, X) -> np.ndarray:
        """Frozen (no-update, greedy) interval bounds, one row per window."""
        if not hasattr(self, "run_"):
            raise ValueError("this forecaster is not fitted yet; call fit first")
        X = check_window_matrix(X, self.window)
        out = np.empty((len(X), 2))
        for i, row in enumerate(X):
            lower, upper, _ = self.run_.predict_interval(row)
            out[i, 0] = lower
            out[i, 1] = upper
        return out

    def score_report(self, include_warmup: bool = False) -> ScoreReport:
        """Headline scores of the fitted trace (warm-up records dropped by default)."""
        if not hasattr(self, "records_"):
            raise ValueError("this forecaster is not fitted yet; call fit first")
        records = self.records_ if include_warmup else strip_warmup(self.records_)
        return score_trace(records, ncp=1.0 - self.beta)


class AdaptiveIntervalForecaster(_EngineBackedForecaster):
    """Online intervals with adaptive proportion selection.

    Parameters mirror the headline engine knobs; pass a full
    :class:`~onlinepi.config.EngineConfig` as ``config`` for everything else.
    """

    def __init__(self, beta=0.1, n_actions=7, window=168, seed=0, config=None):
        self.beta = beta
        self.n_actions = n_actions
        self.window = window
        self.seed = seed
        self.config = config

    def _fit_run(self, series: np.ndarray) -> EngineRun:
        cfg = self._build_config()
        cfg.n_actions = self.n_actions
        return fit_online(series, cfg)


class CentralIntervalForecaster(_EngineBackedForecaster):
    """Online central intervals: the proportion stays fixed at ``beta / 2``."""

    def __init__(self, beta=0.1, window=168, seed=0, config=None):
        self.beta = beta
        self.window = window
        self.seed = seed
        self.config = config

    def _fit_run(self, series: np.ndarray) -> EngineRun:
        return fit_online_cpi(series, self._build_config())


class HourOfDayBaseline(BaseEstimator):
    """Fixed per-hour empirical-quantile intervals (persistence-style).

    ``fit`` learns one ``(lower, upper)`` pair per hour of day from the
    training series; ``predict`` maps absolute step indices to those bounds.
    """

    def __init__(self, beta=0.1):
        self.beta = beta

    def fit(self, y):
        series = check_series(y, min_length=24 * 10)
        check_unit_open("beta", self.beta)
        lower = np.zeros(24)
        upper = np.zeros(24)
        for hour in range(24):
            vals = series[hour::24]
            if len(vals) < 10:
                raise ValueError(f"hour {hour} has only {len(vals)} training samples (need >= 10)")
            lower[hour] = np.quantile(vals, self.beta / 2.0, method="weibull")
            upper[hour] = np.quantile(vals, 1.0 - self.beta / 2.0, method="weibull")
        self.lower_by_hour_ = lower
        self.upper_by_hour_ = upper
        return self

    def predict(self, steps) -> np.ndarray:
        """Bounds for absolute step indices (hour = step mod 24)."""
        if not hasattr(self, "lower_by_hour_"):
            raise ValueError("this forecaster is not fitted yet; call fit first")
        steps = np.asarray(steps, dtype=np.int64)
        hours = steps % 24
        return np.column_stack([self.lower_by_hour_[hours], self.upper_by_hour_[hours]])
