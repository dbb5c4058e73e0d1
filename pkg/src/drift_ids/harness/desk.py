"""Desk-scale benchmark preset: the 12-domain grid that runs on a laptop.

4 attacks x 3 behavioral variants at network size 5, with 6 simulation runs
of 120 minutes per domain. Training is shortened (20 epochs, batch 128,
lr 3e-3, hidden 32) so the full 6-method x 4-scenario x 3-seed grid finishes
in minutes; every knob stays config-exposed for larger sweeps (the 48-domain
grid is the same config with all four network sizes and 20 runs).
"""

from __future__ import annotations

from ..dataplane import ATTACKS, VARIANTS
from ..idsmodel import ModelConfig, TrainConfig
from .config import DataConfig, SuiteConfig

DESK_SEEDS = (0, 1, 2)
DESK_SCENARIOS = ("random", "b2w", "w2b", "toggle")
DESK_STRATEGIES = (
    ("naive", {}),
    ("replay", {"capacity": 1000}),
    ("ewc", {}),
    ("si", {}),
    ("lwf", {}),
    ("gr", {}),
)


def desk_domain_dicts(network_size: int = 5, runs: int = 6,
                      minutes_per_run: int = 120) -> tuple[dict, ...]:
    return tuple({"attack": attack, "variant": variant,
                  "network_size": network_size, "runs": runs,
                  "minutes_per_run": minutes_per_run}
                 for attack in ATTACKS for variant in VARIANTS)


def desk_model_config() -> ModelConfig:
    return ModelConfig(hidden_size=32, fc_size=16, dropout_rate=0.2, seed=0)


def desk_train_config() -> TrainConfig:
    return TrainConfig(learning_rate=0.003, epochs=20, batch_size=128, seed=0)


def desk_suite_config(out_dir: str, seeds=DESK_SEEDS,
                      scenarios=DESK_SCENARIOS,
                      strategies=DESK_STRATEGIES) -> SuiteConfig:
    return SuiteConfig(
        seeds=tuple(seeds),
        scenarios=tuple(scenarios),
        strategies=tuple(strategies),
        metric_kind="auc",
        epsilon=0.1,
        budget=1000,
        model=desk_model_config(),
        train=desk_train_config(),
        data=DataConfig(domains=desk_domain_dicts()),
        out_dir=out_dir,
    )


def desk_suite_json(out_dir: str) -> dict:
    """The same preset as a plain-JSON payload (for the CLI)."""
    return {
        "seeds": list(DESK_SEEDS),
        "scenarios": list(DESK_SCENARIOS),
        "strategies": [{"name": name, "params": params}
                       for name, params in DESK_STRATEGIES],
        "metric_kind": "auc",
        "epsilon": 0.1,
        "budget": 1000,
        "model": {"hidden_size": 32, "fc_size": 16, "dropout_rate": 0.2},
        "train": {"learning_rate": 0.003, "epochs": 20, "batch_size": 128},
        "data": {"domains": [dict(d) for d in desk_domain_dicts()]},
        "out_dir": out_dir,
    }
