"""Synaptic Intelligence: online path-integral importance accumulation.

During training, omega_i accumulates -g_i * delta_i per optimizer step (the
contribution of parameter motion to loss decrease). At consolidation the
clamped path integral becomes an importance weight
Omega_i += max(0, omega_i) / ((theta_i - anchor_i)^2 + xi), after which the
anchor moves and omega resets.
"""

from __future__ import annotations

from .base import StrategyHooks


class SiStrategy(StrategyHooks):
    name = "si"
    needs_step_deltas = True

    def __init__(self, c: float = 500.0, xi: float = 0.1):
        self.c = c
        self.xi = xi
        self.anchor = None
        self.omega = None
        self.importance = None
        self._consolidated = False

    def before_domain(self, model, domain_index: int) -> None:
        if self.anchor is None:
            self.anchor = model.params.clone()
            self.importance = model.params.zeros_like()
        self.omega = model.params.zeros_like()

    def on_step(self, params, grads, delta) -> None:
        if delta is None or self.omega is None:
            return
        for name in self.omega:
            self.omega[name] += -grads[name] * delta[name]

    def loss_penalty(self, params):
        """c * sum_i Omega_i (theta_i - anchor_i)^2, gradient 2c Omega (theta - anchor)."""
        if self.c == 0.0 or not self._consolidated:
            return None
        value = 0.0
        grads = params.zeros_like()
        for name in params:
            diff = params[name] - self.anchor[name]
            omega_cap = self.importance[name]
            value += self.c * float((omega_cap * diff * diff).sum())
            grads[name] = 2.0 * self.c * omega_cap * diff
        return value, grads

    def after_domain(self, model, domain_dataset) -> None:
        self.consolidate(model)

    def consolidate(self, model) -> None:
        params = model.params
        for name in self.importance:
            diff = params[name] - self.anchor[name]
            gain = self.omega[name].copy()
            gain[gain < 0.0] = 0.0
            self.importance[name] += gain / (diff * diff + self.xi)
        self.anchor = params.clone()
        self.omega = params.zeros_like()
        self._consolidated = True

    def telemetry(self) -> dict:
        if self.importance is None:
            return {"consolidations": 0}
        return {"importance_mass": float(sum(self.importance[n].sum()
                                             for n in self.importance))}
