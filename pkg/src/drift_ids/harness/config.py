"""Experiment and suite configuration: JSON schema, validation, loading."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..clstrat import STRATEGY_NAMES
from ..dataplane import DomainDataset, load_domain_features
from ..errors import ConfigError
from ..idsmodel import ModelConfig, TrainConfig
from ..trafficgen import DomainSpec, build_domain_dataset

SCENARIOS = ("random", "b2w", "w2b", "toggle")


@dataclass(frozen=True)
class DataConfig:
    """Where domains come from: synthetic specs or ingested feature caches."""

    source: str = "synthetic"
    domains: tuple[dict, ...] = ()
    paths: tuple[str, ...] = ()
    window: int = 10
    stride: int = 1
    split_ratio: float = 0.8

    def __post_init__(self):
        if self.source not in ("synthetic", "paths"):
            raise ConfigError(f"unknown data source {self.source!r}")
        if self.source == "synthetic" and len(self.domains) < 2:
            raise ConfigError("synthetic data needs >= 2 domain specs")
        if self.source == "paths" and len(self.paths) < 2:
            raise ConfigError("path data needs >= 2 feature caches")


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    scenario: str
    strategy_name: str
    strategy_params: dict = field(default_factory=dict)
    metric_kind: str = "auc"
    epsilon: float = 0.1
    budget: int = 1000
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=lambda: DataConfig(
        domains=({"attack": "BH"}, {"attack": "DF"})))
    out_dir: str | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; "
                              f"expected one of {SCENARIOS}")
        if self.strategy_name not in STRATEGY_NAMES:
            raise ConfigError(f"unknown strategy {self.strategy_name!r}")
        if self.metric_kind not in ("auc", "f1"):
            raise ConfigError(f"unknown metric kind {self.metric_kind!r}")
        if self.budget < 0 or self.epsilon < 0:
            raise ConfigError("budget and epsilon must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "scenario": self.scenario,
            "strategy": {"name": self.strategy_name,
                         "params": dict(self.strategy_params)},
            "metric_kind": self.metric_kind,
            "epsilon": self.epsilon,
            "budget": self.budget,
            "model": {"hidden_size": self.model.hidden_size,
                      "fc_size": self.model.fc_size,
                      "dropout_rate": self.model.dropout_rate,
                      "seed": self.model.seed},
            "train": {"learning_rate": self.train.learning_rate,
                      "epochs": self.train.epochs,
                      "batch_size": self.train.batch_size,
                      "seed": self.train.seed},
            "data": {"source": self.data.source,
                     "domains": [dict(d) for d in self.data.domains],
                     "paths": list(self.data.paths),
                     "window": self.data.window,
                     "stride": self.data.stride,
                     "split_ratio": self.data.split_ratio},
            "out_dir": self.out_dir,
        }


def _model_config(payload: dict | None) -> ModelConfig:
    payload = dict(payload or {})
    allowed = {"hidden_size", "fc_size", "dropout_rate", "seed"}
    unknown = set(payload) - allowed
    if unknown:
        raise ConfigError(f"unknown model config keys {sorted(unknown)}")
    return ModelConfig(**payload)


def _train_config(payload: dict | None) -> TrainConfig:
    payload = dict(payload or {})
    allowed = {"learning_rate", "epochs", "batch_size", "seed"}
    unknown = set(payload) - allowed
    if unknown:
        raise ConfigError(f"unknown train config keys {sorted(unknown)}")
    return TrainConfig(**payload)


def _data_config(payload: dict | None) -> DataConfig:
    payload = dict(payload or {})
    return DataConfig(
        source=payload.get("source", "synthetic"),
        domains=tuple(payload.get("domains", ())),
        paths=tuple(payload.get("paths", ())),
        window=int(payload.get("window", 10)),
        stride=int(payload.get("stride", 1)),
        split_ratio=float(payload.get("split_ratio", 0.8)),
    )


def experiment_config_from_dict(payload: dict) -> ExperimentConfig:
    if "seed" not in payload:
        raise ConfigError("experiment config requires an explicit seed")
    strategy = payload.get("strategy", {})
    if isinstance(strategy, str):
        strategy = {"name": strategy}
    return ExperimentConfig(
        seed=int(payload["seed"]),
        scenario=payload.get("scenario", "random"),
        strategy_name=strategy.get("name", "naive"),
        strategy_params=dict(strategy.get("params", {})),
        metric_kind=payload.get("metric_kind", "auc"),
        epsilon=float(payload.get("epsilon", 0.1)),
        budget=int(payload.get("budget", 1000)),
        model=_model_config(payload.get("model")),
        train=_train_config(payload.get("train")),
        data=_data_config(payload.get("data")),
        out_dir=payload.get("out_dir"),
    )


def load_experiment_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return experiment_config_from_dict(json.load(fh))


@dataclass(frozen=True)
class SuiteConfig:
    seeds: tuple[int, ...]
    scenarios: tuple[str, ...]
    strategies: tuple[tuple[str, dict], ...]
    metric_kind: str = "auc"
    epsilon: float = 0.1
    budget: int = 1000
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=lambda: DataConfig(
        domains=({"attack": "BH"}, {"attack": "DF"})))
    out_dir: str = "out"

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("suite needs at least one seed")
        for scenario in self.scenarios:
            if scenario not in SCENARIOS:
                raise ConfigError(f"unknown scenario {scenario!r}")
        names = [name for name, _ in self.strategies]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate strategy names in suite")
        for name, _ in self.strategies:
            if name not in STRATEGY_NAMES:
                raise ConfigError(f"unknown strategy {name!r}")


def suite_config_from_dict(payload: dict) -> SuiteConfig:
    if "seeds" not in payload:
        raise ConfigError("suite config requires an explicit seed list")
    strategies = []
    for entry in payload.get("strategies", [{"name": "naive"}]):
        if isinstance(entry, str):
            entry = {"name": entry}
        strategies.append((entry["name"], dict(entry.get("params", {}))))
    return SuiteConfig(
        seeds=tuple(int(s) for s in payload["seeds"]),
        scenarios=tuple(payload.get("scenarios", list(SCENARIOS))),
        strategies=tuple(strategies),
        metric_kind=payload.get("metric_kind", "auc"),
        epsilon=float(payload.get("epsilon", 0.1)),
        budget=int(payload.get("budget", 1000)),
        model=_model_config(payload.get("model")),
        train=_train_config(payload.get("train")),
        data=_data_config(payload.get("data")),
        out_dir=payload.get("out_dir", "out"),
    )


def load_suite_config(path) -> SuiteConfig:
    with open(path, encoding="utf-8") as fh:
        return suite_config_from_dict(json.load(fh))


def load_domains(data: DataConfig, seed: int) -> list[DomainDataset]:
    """Materialize the domain list for one experiment seed.

    Synthetic specs get per-domain seeds derived from (seed, position) so a
    different experiment seed regenerates every domain; explicit "seed" keys
    in a spec win.
    """
    if data.source == "paths":
        return [load_domain_features(Path(p)) for p in data.paths]
    domains = []
    for idx, spec_dict in enumerate(data.domains):
        payload = dict(spec_dict)
        payload.setdefault("seed", seed * 1009 + idx)
        spec = DomainSpec.from_dict(payload)
        domains.append(build_domain_dataset(spec, split_ratio=data.split_ratio,
                                            window=data.window,
                                            stride=data.stride))
    ids = [d.domain_id for d in domains]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"duplicate domain ids in config: {ids}")
    return domains
