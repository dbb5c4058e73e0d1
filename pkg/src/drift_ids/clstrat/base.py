"""Method-agnostic strategy contract: the hook set the training loop calls.

A strategy interacts with training at five points: before a domain starts,
when a batch is assembled (augment), when the batch loss is formed (penalty),
after each optimizer step, and after a domain finishes. Every hook defaults to a
no-op, so the base class *is* the naive fine-tuning baseline (W/O CL).
"""

from __future__ import annotations

import numpy as np


class StrategyHooks:
    """All-no-op hook set; training with it matches training with no hooks."""

    name = "naive"
    needs_step_deltas = False

    def before_domain(self, model, domain_index: int) -> None:
        pass

    def augment_batch(self, batch):
        """May return a new (X, y) pair; must never mutate the input arrays."""
        return batch

    def loss_penalty(self, params):
        """Return None (no penalty), or (value, GradSet-or-None) to add."""
        return (0.0, None)

    def on_step(self, params, grads, delta) -> None:
        pass

    def after_domain(self, model, domain_dataset) -> None:
        pass

    def memory_samples(self) -> int:
        """Stored raw samples |A_t| counted against the replay budget."""
        return 0

    def telemetry(self) -> dict:
        return {}


def naive_hooks() -> StrategyHooks:
    """The W/O CL baseline: plain sequential fine-tuning."""
    return StrategyHooks()


def stack_feature_windows(windows) -> tuple[np.ndarray, np.ndarray]:
    X = np.stack([w.features for w in windows])
    y = np.array([w.label for w in windows], dtype=np.intp)
    return X, y
