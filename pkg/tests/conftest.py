"""Shared helpers: desk-scale configs that keep runs fast."""

import pytest

from onlinepi.config import EngineConfig


def small_engine_config(**overrides) -> EngineConfig:
    cfg = EngineConfig(beta=0.2, n_actions=3, window=12, seed=0)
    cfg.predictor.batch_size = 16
    cfg.predictor.hidden_layers = (16,)
    cfg.predictor.buffer_capacity = 400
    cfg.agent.hidden_layers = (16, 8)
    cfg.agent.batch_size = 16
    cfg.agent.buffer_capacity = 400
    for key, value in overrides.items():
        setattr(cfg, key, value)
    return cfg


@pytest.fixture
def small_config():
    return small_engine_config()
