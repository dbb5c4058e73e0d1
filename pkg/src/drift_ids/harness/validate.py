"""Self-check suite: gradient correctness plus metric oracles.

Every check pairs a production code path with an independent recomputation:
analytic gradients against central finite differences, the rank-based AUC
against the O(N^2) pairwise count, and the four continual-learning metrics
against brute-force loops over dense matrices.
"""

from __future__ import annotations

import math

import numpy as np

from ..clmetrics import (
    PerfMatrix,
    TimingTable,
    auc_score,
    perf_average,
    plasticity,
    stability_bwt,
    training_efficiency,
)
from ..clstrat import EwcStrategy, SiStrategy
from ..idsmodel import ModelConfig, build_model, ce_loss_and_grads
from ..numgrad import (
    GradSet,
    ParamSet,
    distillation_loss,
    finite_difference_check,
)

THRESHOLDS = {
    "classifier_fd": 1e-4,
    "ewc_penalty_fd": 1e-8,
    "si_penalty_fd": 1e-8,
    "lwf_distillation_fd": 1e-8,
    "metric_oracle_diff": 1e-12,
    "auc_oracle_diff": 0.0,
}


def classifier_gradient_error(seed: int = 0) -> float:
    cfg = ModelConfig(hidden_size=6, fc_size=4, dropout_rate=0.0, seed=seed)
    model = build_model(cfg)
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, size=(6, 5, 14))
    y = rng.integers(0, 2, size=6)
    return finite_difference_check(lambda p: ce_loss_and_grads(p, cfg, X, y),
                                   model.params, samples=80, seed=seed)


def ewc_penalty_error(seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    strat = EwcStrategy(lam=5.0)
    strat.anchor = ParamSet({"w": rng.normal(size=30)})
    strat.fisher = GradSet({"w": rng.uniform(0.1, 2.0, size=30)})
    params = ParamSet({"w": rng.normal(size=30)})
    return finite_difference_check(lambda p: strat.loss_penalty(p), params,
                                   samples=30, seed=seed)


def si_penalty_error(seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    strat = SiStrategy(c=0.7, xi=0.1)
    strat.anchor = ParamSet({"w": rng.normal(size=30)})
    strat.importance = GradSet({"w": rng.uniform(0.0, 3.0, size=30)})
    strat._consolidated = True
    params = ParamSet({"w": rng.normal(size=30)})
    return finite_difference_check(lambda p: strat.loss_penalty(p), params,
                                   samples=30, seed=seed)


def lwf_distillation_error(seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    teacher = rng.normal(size=(5, 2))
    params = ParamSet({"logits": rng.normal(size=(5, 2))})

    def loss_fn(p):
        loss, d = distillation_loss(p["logits"], teacher, temperature=2.0)
        return loss, GradSet({"logits": d})

    return finite_difference_check(loss_fn, params, samples=10, seed=seed)


def _brute_force_eqs(values: np.ndarray, T: int):
    avg = sum(values[T][j] for j in range(T)) / T
    plast = sum(values[j][j - 1] - values[j - 1][j - 1]
                for j in range(2, T + 1)) / (T - 1)
    bwts = [sum(values[t][i - 1] - values[i][i - 1] for i in range(1, t)) / (t - 1)
            for t in range(2, T + 1)]
    return avg, plast, sum(bwts) / (T - 1)


def metric_oracle_error(instances: int = 100, seed: int = 0) -> float:
    """Max |implementation - brute force| over random Perf matrices and
    timing tables."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        T = int(rng.integers(2, 10))
        matrix = PerfMatrix(T)
        values = np.zeros((T + 1, T))
        for i in range(T + 1):
            for j in range(1, min(i + 1, T) + 1):
                v = float(rng.uniform(0, 1))
                matrix.set(i, j, v)
                values[i][j - 1] = v
        avg, plast, stab = _brute_force_eqs(values, T)
        s_bar, _ = stability_bwt(matrix)
        worst = max(worst, abs(perf_average(matrix) - avg),
                    abs(plasticity(matrix) - plast), abs(s_bar - stab))

        table = TimingTable()
        rows = {f"m{k}": list(rng.uniform(0.05, 5.0, size=T)) for k in range(3)}
        for name, row in rows.items():
            table.add(name, row)
        te = training_efficiency(table)
        for name, row in rows.items():
            prod = 1.0
            for t in range(T):
                prod *= min(r[t] for r in rows.values()) / row[t]
            worst = max(worst, abs(te[name] - prod ** (1.0 / T)))
    return worst


def auc_oracle_error(instances: int = 100, seed: int = 0) -> float:
    """Max |rank-based AUC - pairwise AUC| over random tied instances."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        n = int(rng.integers(2, 201))
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        scores = np.round(rng.uniform(0, 1, size=n), 2)
        pos = scores[labels == 1]
        neg = scores[labels == 0]
        wins = sum((1.0 if sp > sn else 0.5 if sp == sn else 0.0)
                   for sp in pos for sn in neg)
        brute = wins / (pos.size * neg.size)
        worst = max(worst, abs(auc_score(scores, labels) - brute))
    return worst


def run_validation(seed: int = 0) -> dict:
    """All checks with their thresholds; 'ok' is the overall verdict."""
    results = {
        "classifier_fd": classifier_gradient_error(seed),
        "ewc_penalty_fd": ewc_penalty_error(seed),
        "si_penalty_fd": si_penalty_error(seed),
        "lwf_distillation_fd": lwf_distillation_error(seed),
        "metric_oracle_diff": metric_oracle_error(seed=seed),
        "auc_oracle_diff": auc_oracle_error(seed=seed),
    }
    checks = {name: (value, THRESHOLDS[name]) for name, value in results.items()}
    ok = all(value <= threshold or math.isclose(value, threshold)
             for value, threshold in checks.values())
    return {"results": results, "thresholds": dict(THRESHOLDS), "ok": ok}
