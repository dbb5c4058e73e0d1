"""Elastic Weight Consolidation with a single accumulated diagonal Fisher.

The online-EWC form: one anchor (the latest post-domain parameters) and one
Fisher diagonal accumulated across domains, keeping auxiliary memory O(|theta|)
regardless of how many domains stream past.
"""

from __future__ import annotations

import numpy as np

from ..errors import DataError
from ..idsmodel import ce_loss_and_grads
from .base import StrategyHooks, stack_feature_windows


class EwcStrategy(StrategyHooks):
    name = "ewc"

    def __init__(self, lam: float = 100.0, fisher_samples: int = 1024,
                 seed: int = 0):
        self.lam = lam
        self.fisher_samples = fisher_samples
        self._rng = np.random.default_rng((seed, 182))
        self.anchor = None
        self.fisher = None

    def loss_penalty(self, params):
        """(lam/2) * sum_i F_i (theta_i - anchor_i)^2 and its exact gradient."""
        if self.anchor is None or self.lam == 0.0:
            return None
        value = 0.0
        grads = params.zeros_like()
        for name in params:
            diff = params[name] - self.anchor[name]
            f = self.fisher[name]
            value += 0.5 * self.lam * float((f * diff * diff).sum())
            grads[name] = self.lam * f * diff
        return value, grads

    def after_domain(self, model, domain_dataset) -> None:
        self.consolidate(model, domain_dataset.train)

    def consolidate(self, model, train_windows) -> None:
        """Accumulate the empirical diagonal Fisher over sampled examples and
        move the anchor to the current parameters.

        F_i += (1/N_s) * sum_n (d CE(x_n) / d theta_i)^2, one backward pass
        per sampled example (per-example gradients cannot be batched).
        """
        windows = list(train_windows)
        if not windows:
            raise DataError("EWC consolidation needs a nonempty sample")
        X, y = stack_feature_windows(windows)
        n = X.shape[0]
        count = self.fisher_samples
        picked = self._rng.choice(n, size=count, replace=count > n)
        increment = model.params.zeros_like()
        for i in picked:
            _, g = ce_loss_and_grads(model.params, model.config,
                                     X[i:i + 1], y[i:i + 1])
            for name in increment:
                increment[name] += g[name] * g[name]
        if self.fisher is None:
            self.fisher = model.params.zeros_like()
        for name in self.fisher:
            self.fisher[name] += increment[name] / count
        self.anchor = model.params.clone()

    def telemetry(self) -> dict:
        if self.fisher is None:
            return {"consolidations": 0}
        total = float(sum(self.fisher[name].sum() for name in self.fisher))
        return {"fisher_mass": total}
