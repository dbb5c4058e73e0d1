"""Continual-learning strategies: naive, Replay, EWC, SI, LwF, Generative Replay."""

from __future__ import annotations

from ..errors import ConfigError
from .base import StrategyHooks, naive_hooks
from .checkpoint import load_strategy_state, save_strategy_state
from .ewc import EwcStrategy
from .genreplay import GenReplayStrategy
from .lwf import LwfStrategy
from .replay import ReplayBuffer, ReplayStrategy
from .si import SiStrategy
from .vae import WindowVae

STRATEGY_NAMES = ("naive", "replay", "ewc", "si", "lwf", "gr")

# hyperparameters that make each strategy reproduce the naive trajectory
NEUTRAL_PARAMS = {
    "naive": {},
    "replay": {"capacity": 0},
    "ewc": {"lam": 0.0},
    "si": {"c": 0.0},
    "lwf": {"distill_weight": 0.0},
    "gr": {"samples_per_batch": 0},
}


def make_strategy(name: str, params: dict | None = None,
                  seed: int = 0) -> StrategyHooks:
    """Build a strategy by name with its hyperparameters."""
    params = dict(params or {})
    if name == "naive":
        return naive_hooks()
    if name == "replay":
        return ReplayStrategy(capacity=params.pop("capacity", 1000), seed=seed,
                              **params)
    if name == "ewc":
        return EwcStrategy(lam=params.pop("lam", 100.0),
                           fisher_samples=params.pop("fisher_samples", 1024),
                           seed=seed, **params)
    if name == "si":
        return SiStrategy(c=params.pop("c", 500.0), xi=params.pop("xi", 0.1),
                          **params)
    if name == "lwf":
        return LwfStrategy(temperature=params.pop("temperature", 2.0),
                           distill_weight=params.pop("distill_weight", 1.0),
                           **params)
    if name == "gr":
        return GenReplayStrategy(seed=seed, **params)
    raise ConfigError(f"unknown strategy {name!r}; expected one of {STRATEGY_NAMES}")


__all__ = [
    "EwcStrategy", "GenReplayStrategy", "LwfStrategy", "NEUTRAL_PARAMS",
    "ReplayBuffer", "ReplayStrategy", "SiStrategy", "STRATEGY_NAMES",
    "StrategyHooks", "WindowVae", "load_strategy_state", "make_strategy",
    "naive_hooks", "save_strategy_state",
]
