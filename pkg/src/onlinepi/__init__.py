"""Online adaptive prediction intervals for time series.

A bank of online quantile-regression networks (one per selectable
proportion, each with prioritized experience replay) supplies interval
bounds, while a dueling value-learning agent picks which lower/upper
proportion pair to use at every step, rewarded with the negated Winkler
score of the realized interval.
"""

from .agent import ActionSpace, DuelingAgent, action_space
from .config import AdamParams, AgentParams, EngineConfig, PerParams, PredictorParams
from .data import SeriesSpec, generate_synthetic, load_csv, make_window, save_csv, split
from .engine import (
    EngineRun,
    StepRecord,
    fit_online,
    fit_online_cpi,
    repair_crossing,
    run_frozen,
    run_naive_baseline,
    run_online,
    run_online_cpi,
    strip_warmup,
)
from .errors import NumericalFault
from .forecasters import AdaptiveIntervalForecaster, CentralIntervalForecaster, HourOfDayBaseline
from .metrics import IntervalForecast, ScoreReport, pinball_loss, reward, score_trace, winkler_score
from .quantile import PredictorBank, QuantilePredictor, make_predictor_bank
from .replay import Experience, PrioritizedBuffer
from .traces import read_trace, write_trace

__version__ = "0.1.0"

__all__ = [
    "ActionSpace",
    "AdamParams",
    "AdaptiveIntervalForecaster",
    "AgentParams",
    "CentralIntervalForecaster",
    "DuelingAgent",
    "EngineConfig",
    "EngineRun",
    "Experience",
    "HourOfDayBaseline",
    "IntervalForecast",
    "NumericalFault",
    "PerParams",
    "PredictorBank",
    "PredictorParams",
    "PrioritizedBuffer",
    "QuantilePredictor",
    "ScoreReport",
    "SeriesSpec",
    "StepRecord",
    "action_space",
    "fit_online",
    "fit_online_cpi",
    "generate_synthetic",
    "load_csv",
    "make_predictor_bank",
    "make_window",
    "pinball_loss",
    "read_trace",
    "repair_crossing",
    "reward",
    "run_frozen",
    "run_naive_baseline",
    "run_online",
    "run_online_cpi",
    "save_csv",
    "score_trace",
    "split",
    "strip_warmup",
    "winkler_score",
    "write_trace",
    "__version__",
]
