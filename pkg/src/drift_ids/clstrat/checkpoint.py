"""Optional strategy-state checkpointing, same container style as the model.

Auxiliary state A_t per strategy: EWC's anchor + Fisher, SI's anchor,
path integrals and importances, the replay buffer's stored windows, LwF's
teacher snapshot, and the generative-replay VAE plus its labeler snapshot.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import ContractError
from ..idsmodel import ModelState, load_checkpoint, save_checkpoint
from ..numgrad import GradSet, ParamSet
from ..dataplane import FeatureWindow
from .base import StrategyHooks
from .ewc import EwcStrategy
from .genreplay import GenReplayStrategy
from .lwf import LwfStrategy
from .replay import ReplayStrategy
from .si import SiStrategy
from .vae import WindowVae

STRATEGY_CHECKPOINT_FORMAT = "drift-ids-strategy/1"


def _tensors_to_json(params) -> dict:
    return {name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
            for name, arr in params.items()}


def _tensors_from_json(payload: dict) -> dict[str, np.ndarray]:
    return {name: np.array(e["data"], dtype=np.float64).reshape(e["shape"])
            for name, e in payload.items()}


def _windows_to_json(windows) -> list[dict]:
    return [{"features": w.features.ravel().tolist(),
             "shape": list(w.features.shape), "label": w.label,
             "source": list(w.source)} for w in windows]


def _windows_from_json(rows) -> list[FeatureWindow]:
    return [FeatureWindow(
        features=np.array(r["features"], dtype=np.float64).reshape(r["shape"]),
        label=int(r["label"]), source=tuple(r["source"])) for r in rows]


def _model_to_json(model: ModelState | None, path_hint: Path, tag: str):
    if model is None:
        return None
    side = path_hint.with_name(path_hint.stem + f".{tag}.json")
    save_checkpoint(model, side)
    return side.name


def save_strategy_state(strategy: StrategyHooks, path) -> None:
    """Write A_t to a JSON container; sidecar model checkpoints get the same
    stem with a tag suffix."""
    path = Path(path)
    state: dict = {"format": STRATEGY_CHECKPOINT_FORMAT, "name": strategy.name}
    if isinstance(strategy, ReplayStrategy):
        buf = strategy.buffer
        state["replay"] = {
            "capacity": buf.capacity,
            "order": list(buf._order),
            "stored": {str(d): _windows_to_json(buf._per_domain[d])
                       for d in buf._order},
            "max_size_seen": buf.max_size_seen,
        }
    elif isinstance(strategy, EwcStrategy):
        state["ewc"] = {
            "lam": strategy.lam,
            "fisher_samples": strategy.fisher_samples,
            "anchor": None if strategy.anchor is None
                      else _tensors_to_json(strategy.anchor),
            "fisher": None if strategy.fisher is None
                      else _tensors_to_json(strategy.fisher),
        }
    elif isinstance(strategy, SiStrategy):
        state["si"] = {
            "c": strategy.c, "xi": strategy.xi,
            "consolidated": strategy._consolidated,
            "anchor": None if strategy.anchor is None
                      else _tensors_to_json(strategy.anchor),
            "omega": None if strategy.omega is None
                     else _tensors_to_json(strategy.omega),
            "importance": None if strategy.importance is None
                          else _tensors_to_json(strategy.importance),
        }
    elif isinstance(strategy, LwfStrategy):
        state["lwf"] = {
            "temperature": strategy.temperature,
            "distill_weight": strategy.distill_weight,
            "teacher": _model_to_json(strategy.teacher, path, "teacher"),
        }
    elif isinstance(strategy, GenReplayStrategy):
        state["gr"] = {
            "latent_dim": strategy.latent_dim,
            "hidden": strategy.hidden,
            "kl_weight": strategy.kl_weight,
            "window_shape": list(strategy._window_shape)
                            if strategy._window_shape else None,
            "vae": None if strategy.vae is None or not strategy.vae.trained
                   else {"input_dim": strategy.vae.input_dim,
                         "params": _tensors_to_json(strategy.vae.params)},
            "labeler": _model_to_json(strategy.labeler, path, "labeler"),
        }
    elif type(strategy) is not StrategyHooks:
        raise ContractError(f"cannot checkpoint strategy {strategy.name!r}")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(state, fh)


def load_strategy_state(strategy: StrategyHooks, path) -> StrategyHooks:
    """Restore A_t into a freshly constructed strategy of the same kind."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        state = json.load(fh)
    if state.get("format") != STRATEGY_CHECKPOINT_FORMAT:
        raise ContractError(f"{path}: not a {STRATEGY_CHECKPOINT_FORMAT} container")
    if state.get("name") != strategy.name:
        raise ContractError(f"checkpoint holds {state.get('name')!r} state, "
                            f"strategy is {strategy.name!r}")

    def _model_from(tag_name):
        if tag_name is None:
            return None
        return load_checkpoint(path.with_name(tag_name))

    if isinstance(strategy, ReplayStrategy):
        payload = state["replay"]
        strategy.buffer.capacity = int(payload["capacity"])
        strategy.buffer._order = [int(d) for d in payload["order"]]
        strategy.buffer._per_domain = {
            int(d): _windows_from_json(rows)
            for d, rows in payload["stored"].items()}
        strategy.buffer.max_size_seen = int(payload["max_size_seen"])
        strategy.buffer.check_invariants()
    elif isinstance(strategy, EwcStrategy):
        payload = state["ewc"]
        strategy.lam = payload["lam"]
        strategy.fisher_samples = int(payload["fisher_samples"])
        strategy.anchor = None if payload["anchor"] is None \
            else ParamSet(_tensors_from_json(payload["anchor"]))
        strategy.fisher = None if payload["fisher"] is None \
            else GradSet(_tensors_from_json(payload["fisher"]))
    elif isinstance(strategy, SiStrategy):
        payload = state["si"]
        strategy.c = payload["c"]
        strategy.xi = payload["xi"]
        strategy._consolidated = bool(payload["consolidated"])
        for attr, cls in (("anchor", ParamSet), ("omega", GradSet),
                          ("importance", GradSet)):
            raw = payload[attr]
            setattr(strategy, attr,
                    None if raw is None else cls(_tensors_from_json(raw)))
    elif isinstance(strategy, LwfStrategy):
        payload = state["lwf"]
        strategy.temperature = payload["temperature"]
        strategy.distill_weight = payload["distill_weight"]
        strategy.teacher = _model_from(payload["teacher"])
        if strategy.teacher is not None:
            strategy._config = strategy.teacher.config
    elif isinstance(strategy, GenReplayStrategy):
        payload = state["gr"]
        strategy.latent_dim = int(payload["latent_dim"])
        strategy.hidden = int(payload["hidden"])
        strategy.kl_weight = payload["kl_weight"]
        strategy._window_shape = tuple(payload["window_shape"]) \
            if payload["window_shape"] else None
        if payload["vae"] is not None:
            vae = WindowVae(input_dim=int(payload["vae"]["input_dim"]),
                            latent_dim=strategy.latent_dim,
                            hidden=strategy.hidden,
                            kl_weight=strategy.kl_weight)
            vae.params = ParamSet(_tensors_from_json(payload["vae"]["params"]))
            vae.trained = True
            strategy.vae = vae
        strategy.labeler = _model_from(payload["labeler"])
    return strategy
