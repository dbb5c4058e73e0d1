"""LSTM binary intrusion-detection classifier and its training loop.

Architecture: LSTM(14 -> H), last hidden state -> Dense(H -> fc) + ReLU ->
inverted dropout -> Dense(fc -> 2) logits. Training is plain mini-batch Adam
on softmax cross-entropy, with optional continual-learning hooks injected
around batch assembly, the loss, and each optimizer step.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .dataplane import stack_windows
from .errors import ConfigError, ContractError, DataError, NumericError, ParameterError
from .numgrad import (
    AdamState,
    GradSet,
    ParamSet,
    adam_step,
    dense_backward,
    dense_forward,
    lstm_cell_backward,
    lstm_cell_forward,
    softmax_cross_entropy,
    softmax_probs,
)

PARAM_ORDER = ("W_i", "W_f", "W_g", "W_o", "U_i", "U_f", "U_g", "U_o",
               "b_i", "b_f", "b_g", "b_o", "W1", "b1", "W2", "b2")


@dataclass(frozen=True)
class ModelConfig:
    hidden_size: int = 64
    fc_size: int = 32
    dropout_rate: float = 0.2
    input_dim: int = 14
    num_classes: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.input_dim != 14:
            raise ConfigError("input_dim is fixed at 14 (the feature vector width)")
        if self.num_classes != 2:
            raise ConfigError("num_classes is fixed at 2 (normal/attack)")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError("dropout_rate must lie in [0, 1)")
        if self.hidden_size < 1 or self.fc_size < 1:
            raise ConfigError("hidden_size and fc_size must be >= 1")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    epochs: int = 100
    batch_size: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0.0:
            raise ConfigError("learning_rate must be positive")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")


@dataclass
class TrainOutcome:
    wall_time_seconds: float
    final_train_loss: float
    per_epoch_losses: list[float] = field(default_factory=list)


@dataclass
class ModelState:
    params: ParamSet
    adam: AdamState
    config: ModelConfig


def parameter_count(config: ModelConfig) -> int:
    D, H, F = config.input_dim, config.hidden_size, config.fc_size
    return 4 * (D * H + H * H + H) + (H * F + F) + (F * config.num_classes
                                                    + config.num_classes)


def build_model(config: ModelConfig) -> ModelState:
    """Seeded uniform(-1/sqrt(fan), 1/sqrt(fan)) init; forget-gate bias 1.0."""
    rng = np.random.default_rng(config.seed)
    D, H, F, C = (config.input_dim, config.hidden_size, config.fc_size,
                  config.num_classes)
    k_lstm = 1.0 / np.sqrt(H)
    k_fc = 1.0 / np.sqrt(F)
    shapes = {}
    for gate in "ifgo":
        shapes[f"W_{gate}"] = ((D, H), k_lstm)
        shapes[f"U_{gate}"] = ((H, H), k_lstm)
        shapes[f"b_{gate}"] = ((H,), k_lstm)
    shapes["W1"] = ((H, F), k_lstm)
    shapes["b1"] = ((F,), k_lstm)
    shapes["W2"] = ((F, C), k_fc)
    shapes["b2"] = ((C,), k_fc)
    tensors = {}
    for name in PARAM_ORDER:
        shape, k = shapes[name]
        tensors[name] = rng.uniform(-k, k, size=shape)
    tensors["b_f"] = np.ones(H)  # standard LSTM practice: open forget gate
    params = ParamSet(tensors)
    return ModelState(params=params, adam=AdamState(params), config=config)


def _as_batch_array(windows) -> np.ndarray:
    if isinstance(windows, np.ndarray):
        X = windows
    else:
        X, _ = stack_windows(windows)
    if X.ndim != 3:
        raise ContractError(f"expected (B, W, 14) input, got shape {X.shape}")
    return X


def _forward_full(params: ParamSet, config: ModelConfig, X: np.ndarray,
                  dropout_rng: np.random.Generator | None):
    B, W, D = X.shape
    if D != config.input_dim:
        raise ContractError(f"feature dim {D} != configured {config.input_dim}")
    H = config.hidden_size
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    cell_caches = []
    for t in range(W):
        h, c, cache = lstm_cell_forward(X[:, t, :], h, c, params)
        cell_caches.append(cache)
    fc1, fc1_cache = dense_forward(h, params["W1"], params["b1"], activation="relu")
    if dropout_rng is not None and config.dropout_rate > 0.0:
        keep = 1.0 - config.dropout_rate
        mask = (dropout_rng.random(fc1.shape) < keep) / keep
        dropped = fc1 * mask
    else:
        mask = None
        dropped = fc1
    logits, fc2_cache = dense_forward(dropped, params["W2"], params["b2"],
                                      activation="none")
    return logits, {"cells": cell_caches, "fc1": fc1_cache, "mask": mask,
                    "fc2": fc2_cache}


def _backward_full(params: ParamSet, config: ModelConfig, caches,
                   d_logits: np.ndarray) -> GradSet:
    grads = params.zeros_like()
    dW2, db2, d_dropped = dense_backward(d_logits, caches["fc2"])
    grads["W2"] += dW2
    grads["b2"] += db2
    d_fc1 = d_dropped * caches["mask"] if caches["mask"] is not None else d_dropped
    dW1, db1, d_h = dense_backward(d_fc1, caches["fc1"])
    grads["W1"] += dW1
    grads["b1"] += db1
    d_c = np.zeros_like(d_h)
    for cache in reversed(caches["cells"]):
        grads, _, d_h, d_c = lstm_cell_backward(d_h, d_c, cache, params, into=grads)
    return grads


def forward(model: ModelState, windows, mode: str = "eval",
            rng: np.random.Generator | None = None) -> np.ndarray:
    """Logits for a batch. Eval mode is deterministic (dropout off); train
    mode applies an inverted dropout mask drawn from ``rng``."""
    if mode not in ("train", "eval"):
        raise ParameterError(f"unknown mode {mode!r}")
    X = _as_batch_array(windows)
    if mode == "train" and model.config.dropout_rate > 0.0:
        if rng is None:
            raise ContractError("train-mode forward with dropout needs an rng")
        logits, _ = _forward_full(model.params, model.config, X, rng)
    else:
        logits, _ = _forward_full(model.params, model.config, X, None)
    return logits


def ce_loss_and_grads(params: ParamSet, config: ModelConfig, X: np.ndarray,
                      y: np.ndarray) -> tuple[float, GradSet]:
    """Cross-entropy and full parameter gradients, dropout disabled."""
    logits, caches = _forward_full(params, config, X, None)
    loss, d_logits = softmax_cross_entropy(logits, y)
    return loss, _backward_full(params, config, caches, d_logits)


def predict_scores(model: ModelState, windows, chunk: int = 1024):
    """Attack probability per window (softmax class-1 mass) plus labels."""
    windows = list(windows)
    X, y = stack_windows(windows)
    scores = np.empty(X.shape[0])
    for start in range(0, X.shape[0], chunk):
        logits = forward(model, X[start:start + chunk], mode="eval")
        scores[start:start + chunk] = softmax_probs(logits)[:, 1]
    return scores, y


class _NoopHooks:
    name = "none"
    needs_step_deltas = False

    def before_domain(self, model, domain_index):
        pass

    def augment_batch(self, batch):
        return batch

    def loss_penalty(self, params):
        return None

    def on_step(self, params, grads, delta):
        pass

    def after_domain(self, model, domain_dataset):
        pass


def train_on_domain(model: ModelState, train_set, train_cfg: TrainConfig,
                    hooks=None, domain_index: int = 0) -> TrainOutcome:
    """Train on one domain's windows with optional strategy hooks.

    Per epoch: seeded shuffle, then per batch: the hook may augment the
    batch, the loss is CE plus the hook's penalty, and after each Adam step
    the hook observes the realized parameter change. The shuffle and dropout
    streams are derived from (seed, domain_index, epoch) only, so hook
    activity never perturbs the base trajectory.
    """
    if hooks is None:
        hooks = _NoopHooks()
    windows = list(train_set) if not isinstance(train_set, tuple) else train_set
    if not windows:
        raise DataError("train_on_domain needs a nonempty train set")
    X_all, y_all = stack_windows(windows)
    cfg = model.config
    n = X_all.shape[0]
    started = time.perf_counter()
    per_epoch = []
    needs_delta = getattr(hooks, "needs_step_deltas", False)
    for epoch in range(train_cfg.epochs):
        shuffle_rng = np.random.default_rng((train_cfg.seed, domain_index, epoch, 0))
        dropout_rng = np.random.default_rng((train_cfg.seed, domain_index, epoch, 1))
        order = shuffle_rng.permutation(n)
        Xe, ye = X_all[order], y_all[order]
        batch_losses = []
        for start in range(0, n, train_cfg.batch_size):
            Xb = Xe[start:start + train_cfg.batch_size]
            yb = ye[start:start + train_cfg.batch_size]
            Xb, yb = hooks.augment_batch((Xb, yb))
            rng = dropout_rng if cfg.dropout_rate > 0.0 else None
            logits, caches = _forward_full(model.params, cfg, Xb, rng)
            loss, d_logits = softmax_cross_entropy(logits, yb)
            grads = _backward_full(model.params, cfg, caches, d_logits)
            penalty = hooks.loss_penalty(model.params)
            if penalty is not None:
                value, pen_grads = penalty
                loss += value
                if pen_grads is not None:
                    grads.add_scaled(pen_grads)
            if not np.isfinite(loss):
                raise NumericError(
                    f"non-finite loss at epoch {epoch}, batch {start // train_cfg.batch_size}")
            before = {name: model.params[name].copy() for name in model.params} \
                if needs_delta else None
            adam_step(model.params, grads, model.adam, train_cfg.learning_rate)
            if needs_delta:
                delta = GradSet({name: model.params[name] - before[name]
                                 for name in model.params})
                hooks.on_step(model.params, grads, delta)
            else:
                hooks.on_step(model.params, grads, None)
            batch_losses.append(loss)
        per_epoch.append(float(np.mean(batch_losses)))
    if per_epoch:
        final_loss = per_epoch[-1]
    else:
        final_loss, _ = softmax_cross_entropy(
            _forward_full(model.params, cfg, X_all, None)[0], y_all)
    elapsed = time.perf_counter() - started
    return TrainOutcome(wall_time_seconds=max(elapsed, 1e-9),
                        final_train_loss=final_loss,
                        per_epoch_losses=per_epoch)


def snapshot(model: ModelState) -> ModelState:
    """Deep frozen copy; later training never touches it."""
    return ModelState(params=model.params.clone(), adam=model.adam.clone(),
                      config=model.config)


def restore(snap: ModelState) -> ModelState:
    """Fresh deep copy of a snapshot (the snapshot stays pristine)."""
    return snapshot(snap)


# ---------------------------------------------------------------------------
# Checkpoint container: JSON with row-major float64 tensors
# ---------------------------------------------------------------------------

CHECKPOINT_FORMAT = "drift-ids-checkpoint/1"


def _tensors_to_json(params: ParamSet) -> dict:
    return {name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
            for name, arr in params.items()}


def _tensors_from_json(payload: dict) -> dict[str, np.ndarray]:
    return {name: np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
            for name, entry in payload.items()}


def save_checkpoint(model: ModelState, path) -> None:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "config": asdict(model.config),
        "params": _tensors_to_json(model.params),
        "adam": {
            "beta1": model.adam.beta1,
            "beta2": model.adam.beta2,
            "eps": model.adam.eps,
            "step_count": model.adam.step_count,
            "m": _tensors_to_json(model.adam.m),
            "v": _tensors_to_json(model.adam.v),
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_checkpoint(path) -> ModelState:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ContractError(f"{path}: not a {CHECKPOINT_FORMAT} container")
    config = ModelConfig(**payload["config"])
    params = ParamSet(_tensors_from_json(payload["params"]))
    adam_info = payload["adam"]
    adam = AdamState(params, beta1=adam_info["beta1"], beta2=adam_info["beta2"],
                     eps=adam_info["eps"])
    adam.step_count = int(adam_info["step_count"])
    adam.m = GradSet(_tensors_from_json(adam_info["m"]))
    adam.v = GradSet(_tensors_from_json(adam_info["v"]))
    return ModelState(params=params, adam=adam, config=config)
