"""Learning without Forgetting: distill the pre-domain model's responses.

From the second domain on, the model state at the start of each domain is
frozen as the teacher. Each batch adds lam_d * distillation_loss between the
student's and teacher's logits on the current inputs. Both distillation
passes run with dropout off; the CE path keeps its own dropout mask.
"""

from __future__ import annotations

from ..idsmodel import _backward_full, _forward_full, snapshot
from ..numgrad import distillation_loss
from .base import StrategyHooks


class LwfStrategy(StrategyHooks):
    name = "lwf"

    def __init__(self, temperature: float = 2.0, distill_weight: float = 1.0):
        self.temperature = temperature
        self.distill_weight = distill_weight
        self.teacher = None
        self._config = None
        self._batch = None

    def before_domain(self, model, domain_index: int) -> None:
        self._config = model.config
        # first domain trains on CE alone; afterwards the incoming state teaches
        self.teacher = snapshot(model) if domain_index >= 1 else None

    def augment_batch(self, batch):
        self._batch = batch
        return batch

    def loss_penalty(self, params):
        if self.teacher is None or self.distill_weight == 0.0 or self._batch is None:
            return None
        X, _ = self._batch
        teacher_logits, _ = _forward_full(self.teacher.params, self._config, X, None)
        student_logits, caches = _forward_full(params, self._config, X, None)
        value, d_logits = distillation_loss(student_logits, teacher_logits,
                                            self.temperature)
        grads = _backward_full(params, self._config, caches,
                               self.distill_weight * d_logits)
        return self.distill_weight * value, grads

    def telemetry(self) -> dict:
        return {"has_teacher": self.teacher is not None}
