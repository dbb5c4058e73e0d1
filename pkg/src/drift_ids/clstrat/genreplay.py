"""Generative replay: a VAE scholar rehearses synthesized past-domain traffic.

After each domain the generator is retrained from scratch on a 1:1 mix of
the current domain's windows and samples drawn from the previous generator
(the scholar recursion). During training, each batch is extended with
generated windows labeled by the classifier snapshot taken at domain start.
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractError
from ..idsmodel import forward, snapshot
from ..numgrad import softmax_probs
from .base import StrategyHooks, stack_feature_windows
from .vae import WindowVae


class GenReplayStrategy(StrategyHooks):
    name = "gr"

    def __init__(self, latent_dim: int = 16, hidden: int = 64,
                 samples_per_batch: int | None = None, vae_epochs: int = 10,
                 vae_lr: float = 0.01, kl_weight: float = 0.05, seed: int = 0):
        self.latent_dim = latent_dim
        self.hidden = hidden
        self.samples_per_batch = samples_per_batch
        self.vae_epochs = vae_epochs
        self.vae_lr = vae_lr
        self.kl_weight = kl_weight
        self.seed = seed
        self.vae: WindowVae | None = None
        self.labeler = None
        self._gen_rng = np.random.default_rng((seed, 185))
        self._domain_index = 0
        self._window_shape: tuple[int, int] | None = None

    @property
    def _active(self) -> bool:
        return self.samples_per_batch is None or self.samples_per_batch > 0

    def before_domain(self, model, domain_index: int) -> None:
        self._domain_index = domain_index
        # the pre-update classifier labels whatever the generator replays
        self.labeler = snapshot(model) if domain_index >= 1 else None

    def generate_labeled(self, n: int, rng: np.random.Generator | None = None):
        """n generated windows plus labels from the previous classifier."""
        if self.vae is None or not self.vae.trained:
            raise ContractError("generate called before the generator was trained")
        if self.labeler is None:
            raise ContractError("no classifier snapshot available for labeling")
        if n == 0:
            W, D = self._window_shape
            return np.zeros((0, W, D)), np.zeros(0, dtype=np.intp)
        rng = rng if rng is not None else self._gen_rng
        flat = self.vae.generate(n, rng)
        W, D = self._window_shape
        X = flat.reshape(n, W, D)
        probs = softmax_probs(forward(self.labeler, X, mode="eval"))
        y = (probs[:, 1] > 0.5).astype(np.intp)
        return X, y

    def augment_batch(self, batch):
        if (not self._active or self.vae is None or not self.vae.trained
                or self.labeler is None):
            return batch
        X, y = batch
        n = self.samples_per_batch if self.samples_per_batch else X.shape[0]
        Xg, yg = self.generate_labeled(n)
        return np.concatenate([X, Xg]), np.concatenate([y, yg])

    def after_domain(self, model, domain_dataset) -> None:
        if not self._active:
            return
        self.train_generator(domain_dataset.train)

    def train_generator(self, train_windows) -> None:
        """Retrain the scholar on current data plus previous-generator samples."""
        X, _ = stack_feature_windows(list(train_windows))
        self._window_shape = (X.shape[1], X.shape[2])
        flat = X.reshape(X.shape[0], -1)
        if self.vae is not None and self.vae.trained:
            prior = self.vae.generate(flat.shape[0], self._gen_rng)
            mix = np.concatenate([flat, prior])
        else:
            mix = flat
        self.vae = WindowVae(input_dim=flat.shape[1], latent_dim=self.latent_dim,
                             hidden=self.hidden, kl_weight=self.kl_weight,
                             seed=(self.seed * 1000003 + self._domain_index))
        self.vae.fit(mix, epochs=self.vae_epochs, lr=self.vae_lr,
                     seed=self.seed * 1000003 + self._domain_index)

    def telemetry(self) -> dict:
        return {"generator_trained": bool(self.vae is not None and self.vae.trained)}
