"""Engine configuration and the flat key-value config format.

Every hyperparameter of the online engine lives in :class:`EngineConfig`,
grouped into small sections.  Configs serialize to diff-friendly flat text
(``section.key = value`` per line) and back, losslessly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Dict, Optional, Tuple

from .validation import check_positive_int, check_unit_closed, check_unit_open

__all__ = [
    "AdamParams",
    "PredictorParams",
    "PerParams",
    "AgentParams",
    "EngineConfig",
    "dumps_flat",
    "loads_flat",
]


@dataclass
class AdamParams:
    """Moment decay rates and stabilizer shared by all optimizers."""

    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


@dataclass
class PredictorParams:
    """Quantile predictor network and update knobs."""

    batch_size: int = 128
    hidden_layers: Tuple[int, ...] = (128,)
    learning_rate: float = 1e-3
    buffer_capacity: int = 5000
    # the replay loss is the IS-weighted mean pinball loss by default;
    # squared_loss=True squares each per-sample pinball term instead, which
    # biases tail predictors outward (kept as an ablation switch)
    squared_loss: bool = False
    grad_clip: float = 0.0


@dataclass
class PerParams:
    """Prioritized replay knobs: prioritization and IS-correction exponents."""

    sigma: float = 0.6
    rho_start: float = 0.4
    rho_end: float = 1.0
    rho_anneal_steps: int = 10_000
    priority_floor: float = 1e-6


@dataclass
class AgentParams:
    """Proportion-selection agent knobs."""

    hidden_layers: Tuple[int, ...] = (512, 256)
    learning_rate: float = 1e-4
    batch_size: int = 128
    buffer_capacity: int = 10_000
    gamma: float = 0.9
    tau: float = 1e-3
    epsilon_start: float = 1.0
    epsilon_end: float = 0.01
    # None derives the decay horizon as 20% of the run length at run time
    epsilon_decay_steps: Optional[int] = None


@dataclass
class EngineConfig:
    """Everything a run needs besides the series itself."""

    beta: float = 0.1
    n_actions: int = 7
    window: int = 168
    lead_time: int = 1  # the engine forecasts one step ahead; fixed
    seed: int = 0
    train_fraction: float = 0.7
    feature_scaling: str = "none"  # "none" or "minmax" over the window itself
    predictor: PredictorParams = field(default_factory=PredictorParams)
    per: PerParams = field(default_factory=PerParams)
    agent: AgentParams = field(default_factory=AgentParams)
    adam: AdamParams = field(default_factory=AdamParams)

    def validate(self) -> "EngineConfig":
        check_unit_open("beta", self.beta)
        check_positive_int("n_actions", self.n_actions)
        if (self.n_actions + 1) & self.n_actions:
            raise ValueError(f"n_actions must be 2**n - 1, got {self.n_actions}")
        check_positive_int("window", self.window)
        if self.lead_time != 1:
            raise ValueError("only one-step-ahead forecasting is supported (lead_time must be 1)")
        check_unit_open("train_fraction", self.train_fraction)
        if self.feature_scaling not in ("none", "minmax"):
            raise ValueError(f"unknown feature_scaling {self.feature_scaling!r}")
        check_positive_int("predictor.batch_size", self.predictor.batch_size)
        check_positive_int("predictor.buffer_capacity", self.predictor.buffer_capacity)
        check_positive_int("agent.batch_size", self.agent.batch_size)
        check_positive_int("agent.buffer_capacity", self.agent.buffer_capacity)
        check_unit_closed("agent.gamma", self.agent.gamma)
        if self.agent.gamma >= 1.0:
            raise ValueError("agent.gamma must be < 1 for a continuing task")
        if not 0.0 < self.agent.tau <= 1.0:
            raise ValueError(f"agent.tau must lie in (0, 1], got {self.agent.tau}")
        return self

    def with_overrides(self, **kwargs) -> "EngineConfig":
        """Copy with top-level fields replaced."""
        return replace(self, **kwargs)


_SECTIONS = {
    "engine": (EngineConfig, None),
    "predictor": (PredictorParams, "predictor"),
    "per": (PerParams, "per"),
    "agent": (AgentParams, "agent"),
    "adam": (AdamParams, "adam"),
}

_TOP_LEVEL_FIELDS = ("beta", "n_actions", "window", "lead_time", "seed", "train_fraction", "feature_scaling")


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(text: str, annotation):
    text = text.strip()
    if annotation is bool:
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if annotation is int:
        return int(text)
    if annotation is float:
        return float(text)
    if annotation is str:
        return text
    if annotation == Tuple[int, ...]:
        return tuple(int(v) for v in text.split(",") if v.strip())
    if annotation == Optional[int]:
        return None if text.lower() == "none" else int(text)
    raise ValueError(f"unsupported config field type {annotation}")


def config_to_flat(cfg: EngineConfig) -> Dict[str, str]:
    """Flatten to ``{'engine.beta': '0.1', ...}`` with formatted values."""
    out: Dict[str, str] = {}
    for name in _TOP_LEVEL_FIELDS:
        out[f"engine.{name}"] = _format_value(getattr(cfg, name))
    for section in ("predictor", "per", "agent", "adam"):
        group = getattr(cfg, section)
        for f in fields(group):
            out[f"{section}.{f.name}"] = _format_value(getattr(group, f.name))
    return out


def config_from_flat(flat: Dict[str, str]) -> EngineConfig:
    """Rebuild an :class:`EngineConfig` from flat keys; unknown keys are ignored."""
    cfg = EngineConfig()
    top_types = {f.name: f.type for f in fields(EngineConfig)}
    for name in _TOP_LEVEL_FIELDS:
        key = f"engine.{name}"
        if key in flat:
            setattr(cfg, name, _parse_value(flat[key], _resolve(top_types[name])))
    for section in ("predictor", "per", "agent", "adam"):
        group = getattr(cfg, section)
        for f in fields(group):
            key = f"{section}.{f.name}"
            if key in flat:
                setattr(group, f.name, _parse_value(flat[key], _resolve(f.type)))
    return cfg


def _resolve(annotation):
    # dataclass field types arrive as strings under `from __future__ import annotations`
    if isinstance(annotation, str):
        return {
            "float": float,
            "int": int,
            "str": str,
            "bool": bool,
            "Tuple[int, ...]": Tuple[int, ...],
            "Optional[int]": Optional[int],
        }[annotation]
    return annotation


def dumps_flat(mapping: Dict[str, str]) -> str:
    """Serialize a flat mapping as sorted ``key = value`` lines."""
    return "".join(f"{k} = {mapping[k]}\n" for k in sorted(mapping))


def loads_flat(text: str) -> Dict[str, str]:
    """Parse ``key = value`` lines; blank lines and ``#`` comments are skipped."""
    out: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out
