"""Experience replay: a budgeted buffer with balanced per-domain quotas."""

from __future__ import annotations

import numpy as np

from ..errors import ContractError, ParameterError
from .base import StrategyHooks, stack_feature_windows


class ReplayBuffer:
    """Stores labeled windows under a hard capacity B.

    Each domain seen so far gets an equal quota (within +/-1, remainders to
    the earliest domains); when a new domain arrives, over-quota domains are
    shrunk by seeded uniform eviction before the new samples enter.
    """

    def __init__(self, capacity: int, seed: int = 0):
        if capacity < 0:
            raise ParameterError("capacity must be >= 0")
        self.capacity = capacity
        self._per_domain: dict[int, list] = {}
        self._order: list[int] = []
        self._rng = np.random.default_rng((seed, 180))
        self.max_size_seen = 0

    def __len__(self) -> int:
        return sum(len(v) for v in self._per_domain.values())

    @property
    def domains_seen(self) -> int:
        return len(self._order)

    def quotas(self) -> dict[int, int]:
        n = len(self._order)
        if n == 0:
            return {}
        base, remainder = divmod(self.capacity, n)
        return {d: base + (1 if i < remainder else 0)
                for i, d in enumerate(self._order)}

    def insert_domain(self, windows, domain_index: int) -> None:
        if domain_index in self._per_domain:
            raise ContractError(f"domain {domain_index} already inserted")
        self._order.append(domain_index)
        quotas = self.quotas()
        for d in self._order[:-1]:
            stored = self._per_domain[d]
            while len(stored) > quotas[d]:
                stored.pop(int(self._rng.integers(len(stored))))
        windows = list(windows)
        take = min(quotas[domain_index], len(windows))
        if take > 0:
            picked = self._rng.choice(len(windows), size=take, replace=False)
            self._per_domain[domain_index] = [windows[i] for i in np.sort(picked)]
        else:
            self._per_domain[domain_index] = []
        self.max_size_seen = max(self.max_size_seen, len(self))
        self.check_invariants()

    def sample(self, k: int, rng: np.random.Generator | None = None) -> list:
        """Uniform sample over all stored windows; without replacement when
        k <= stored, with replacement otherwise."""
        if k < 0:
            raise ParameterError("sample size must be >= 0")
        if k == 0:
            return []
        pool = [w for d in self._order for w in self._per_domain[d]]
        if not pool:
            raise ContractError("cannot sample from an empty buffer")
        rng = rng if rng is not None else self._rng
        idx = rng.choice(len(pool), size=k, replace=k > len(pool))
        return [pool[i] for i in idx]

    def per_domain_counts(self) -> dict[int, int]:
        return {d: len(self._per_domain[d]) for d in self._order}

    def check_invariants(self) -> None:
        """Raises if the budget or the balanced-quota rule is violated."""
        total = len(self)
        if total > self.capacity:
            raise ContractError(
                f"buffer holds {total} windows, over budget {self.capacity}")
        quotas = self.quotas()
        for d, stored in self._per_domain.items():
            if len(stored) > quotas.get(d, 0):
                raise ContractError(
                    f"domain {d} holds {len(stored)} windows, over its quota "
                    f"{quotas.get(d, 0)}")


class ReplayStrategy(StrategyHooks):
    """Rehearsal: every batch is doubled with sampled past-domain windows."""

    name = "replay"

    def __init__(self, capacity: int = 1000, seed: int = 0):
        self.buffer = ReplayBuffer(capacity, seed=seed)
        self._sample_rng = np.random.default_rng((seed, 181))
        self._domain_index = 0

    def before_domain(self, model, domain_index: int) -> None:
        self._domain_index = domain_index

    def augment_batch(self, batch):
        X, y = batch
        if len(self.buffer) == 0:
            return batch
        replays = self.buffer.sample(X.shape[0], rng=self._sample_rng)
        Xr, yr = stack_feature_windows(replays)
        return np.concatenate([X, Xr]), np.concatenate([y, yr])

    def after_domain(self, model, domain_dataset) -> None:
        if self.buffer.capacity == 0:
            return
        self.buffer.insert_domain(domain_dataset.train, self._domain_index)

    def memory_samples(self) -> int:
        return len(self.buffer)

    def telemetry(self) -> dict:
        return {"buffer_size": len(self.buffer),
                "buffer_max_seen": self.buffer.max_size_seen,
                "per_domain": {str(k): v
                               for k, v in self.buffer.per_domain_counts().items()}}
