"""Classification scores, the Perf matrix, and the four continual-learning metrics.

Perf_{i,j} is the performance on domain j after training through domain i,
with 1-based indices matching the usual notation: i = 0 is the untrained
model, j runs over 1..T. The matrix stores the lower triangle (j <= i) plus
the superdiagonal (j = i + 1), which holds the pre-exposure evaluation of
each incoming domain needed by the plasticity metric.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, ConfigError, UndefinedMetricError


class DegenerateMetricWarning(UserWarning):
    """Emitted when F1 is reported as 0 because a class is absent."""


def f1_score(predictions, labels) -> float:
    """F1 for the attack class (1). Returns 0 with a warning when no true
    or predicted positives exist."""
    y_pred = np.asarray(predictions).astype(np.intp)
    y_true = np.asarray(labels).astype(np.intp)
    if y_pred.shape != y_true.shape or y_pred.ndim != 1:
        raise ContractError(
            f"predictions/labels must be equal-length vectors, got "
            f"{y_pred.shape} vs {y_true.shape}")
    if y_pred.size < 1:
        raise ContractError("f1_score requires at least one example")
    tp = int(np.sum((y_pred == 1) & (y_true == 1)))
    fp = int(np.sum((y_pred == 1) & (y_true == 0)))
    fn = int(np.sum((y_pred == 0) & (y_true == 1)))
    if tp + fp == 0 or tp + fn == 0:
        warnings.warn("no predicted or no actual positives; F1 reported as 0",
                      DegenerateMetricWarning, stacklevel=2)
        return 0.0
    return 2.0 * tp / (2.0 * tp + fp + fn)


def auc_score(scores, labels) -> float:
    """ROC AUC via the Mann-Whitney rank-sum formulation, ties counted 1/2.

    Average ranks over tied scores give the exact pairwise value in
    O(N log N). Raises when only one class is present (the metric is
    undefined, never silently 0).
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(np.intp)
    if s.shape != y.shape or s.ndim != 1:
        raise ContractError("scores/labels must be equal-length vectors")
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(
            f"AUC undefined: {n_pos} positives, {n_neg} negatives")
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(s.size, dtype=np.float64)
    sorted_scores = s[order]
    i = 0
    while i < s.size:
        j = i
        while j + 1 < s.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0  # average 1-based rank
        i = j + 1
    rank_sum_pos = float(ranks[y == 1].sum())
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


# ---------------------------------------------------------------------------
# Perf matrix and the three metrics over it
# ---------------------------------------------------------------------------


class PerfMatrix:
    """Lower-triangular-plus-superdiagonal store of Perf_{i,j} values."""

    def __init__(self, T: int, metric_kind: str = "auc"):
        if T < 1:
            raise ContractError("PerfMatrix needs T >= 1")
        if metric_kind not in ("auc", "f1"):
            raise ConfigError(f"unknown metric kind {metric_kind!r}")
        self.T = T
        self.metric_kind = metric_kind
        # rows i = 0..T (0 = untrained), cols j = 1..T
        self._values = np.full((T + 1, T), np.nan)

    def _check_cell(self, i: int, j: int) -> None:
        if not (1 <= j <= self.T) or not (0 <= i <= self.T):
            raise ContractError(f"cell ({i}, {j}) outside a {self.T}-domain matrix")
        if j > i + 1:
            raise ContractError(
                f"cell ({i}, {j}) is above the superdiagonal; only j <= i + 1 "
                "entries exist in the evaluation schedule")

    def set(self, i: int, j: int, value: float) -> None:
        self._check_cell(i, j)
        if not 0.0 <= value <= 1.0:
            raise ContractError(f"Perf value {value} outside [0, 1]")
        self._values[i, j - 1] = value

    def get(self, i: int, j: int) -> float:
        self._check_cell(i, j)
        v = self._values[i, j - 1]
        if math.isnan(v):
            raise ContractError(f"Perf cell ({i}, {j}) was never filled")
        return float(v)

    def has(self, i: int, j: int) -> bool:
        return not math.isnan(self._values[i, j - 1])

    def filled_cells(self):
        for i in range(self.T + 1):
            for j in range(1, self.T + 1):
                if j <= i + 1 and self.has(i, j):
                    yield i, j, float(self._values[i, j - 1])


def perf_update(matrix: PerfMatrix, i: int, j: int, value: float) -> None:
    matrix.set(i, j, value)


def perf_average(matrix: PerfMatrix) -> float:
    """Average performance: mean of the bottom row Perf_{T,t}."""
    T = matrix.T
    return sum(matrix.get(T, t) for t in range(1, T + 1)) / T


def plasticity(matrix: PerfMatrix) -> float:
    """Plasticity: mean of Perf_{j,j} - Perf_{j-1,j} over j = 2..T."""
    T = matrix.T
    if T < 2:
        raise ContractError("plasticity needs at least 2 domains")
    gains = [matrix.get(j, j) - matrix.get(j - 1, j) for j in range(2, T + 1)]
    return sum(gains) / (T - 1)


def stability_bwt(matrix: PerfMatrix) -> tuple[float, list[float]]:
    """Stability: per-step backward transfer BWT_t and their mean S-bar.

    BWT_t = mean over i < t of (Perf_{t,i} - Perf_{i,i}); negative values
    indicate forgetting.
    """
    T = matrix.T
    if T < 2:
        raise ContractError("stability needs at least 2 domains")
    bwt = []
    for t in range(2, T + 1):
        drops = [matrix.get(t, i) - matrix.get(i, i) for i in range(1, t)]
        bwt.append(sum(drops) / (t - 1))
    return sum(bwt) / (T - 1), bwt


# ---------------------------------------------------------------------------
# Training efficiency
# ---------------------------------------------------------------------------


@dataclass
class TimingTable:
    """Wall seconds per (method, domain position)."""

    times: dict[str, list[float]] = field(default_factory=dict)

    def add(self, method: str, seconds: list[float]) -> None:
        if any(s <= 0.0 for s in seconds):
            raise ValueError(f"non-positive training time for method {method!r}")
        self.times[method] = list(seconds)

    def methods(self) -> list[str]:
        return list(self.times)


def training_efficiency(timings: TimingTable) -> dict[str, float]:
    """Geometric mean over domains of TT_min(t) / TT_a(t), in log space."""
    if not timings.times:
        raise ValueError("empty timing table")
    lengths = {len(v) for v in timings.times.values()}
    if len(lengths) != 1:
        raise ConfigError("methods were not timed on the same number of domains")
    T = lengths.pop()
    if T == 0:
        raise ValueError("timing table has no domains")
    for method, row in timings.times.items():
        if any(s <= 0.0 for s in row):
            raise ValueError(f"non-positive training time for method {method!r}")
    mins = [min(timings.times[m][t] for m in timings.times) for t in range(T)]
    out = {}
    for method, row in timings.times.items():
        log_sum = sum(math.log(mins[t] / row[t]) for t in range(T))
        out[method] = math.exp(log_sum / T)
    return out


# ---------------------------------------------------------------------------
# Budget / forgetting constraint report
# ---------------------------------------------------------------------------


@dataclass
class ConstraintReport:
    budget: int
    epsilon: float
    max_memory_seen: int
    bwt_per_step: list[float]
    violations: list[dict]
    note: str = ("forgetting constraint interpreted as |min(0, BWT_t)| <= epsilon; "
                 "forgetting manifests as negative BWT")

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "budget": self.budget,
            "epsilon": self.epsilon,
            "max_memory_seen": self.max_memory_seen,
            "bwt_per_step": self.bwt_per_step,
            "violations": self.violations,
            "ok": self.ok,
            "note": self.note,
        }


def constraint_report(memory_series, bwt_per_step, budget: int,
                      epsilon: float) -> ConstraintReport:
    """Flag steps where auxiliary memory exceeded the budget or forgetting
    magnitude exceeded epsilon.

    ``memory_series``: iterable of (step_label, stored_sample_count).
    ``bwt_per_step``: BWT_t values for t = 2..T (position t derived by index).
    """
    violations = []
    max_mem = 0
    for label, size in memory_series:
        size = int(size)
        max_mem = max(max_mem, size)
        if size > budget:
            violations.append({"kind": "memory", "step": label, "size": size,
                               "budget": budget})
    for offset, bwt in enumerate(bwt_per_step):
        t = offset + 2
        if abs(min(0.0, bwt)) > epsilon:
            violations.append({"kind": "forgetting", "step": t, "bwt": bwt,
                               "epsilon": epsilon})
    return ConstraintReport(budget=budget, epsilon=epsilon,
                            max_memory_seen=max_mem,
                            bwt_per_step=list(bwt_per_step),
                            violations=violations)


# ---------------------------------------------------------------------------
# On-disk formats
# ---------------------------------------------------------------------------


def write_perf_matrix_csv(path, cells) -> None:
    """``cells``: iterable of (after_domain, eval_domain, f1, auc)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["after_domain", "eval_domain", "f1", "auc"])
        for i, j, f1, auc in cells:
            writer.writerow([i, j, repr(float(f1)), repr(float(auc))])


def read_perf_matrix_csv(path) -> list[tuple[int, int, float, float]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [(int(r["after_domain"]), int(r["eval_domain"]),
                 float(r["f1"]), float(r["auc"])) for r in reader]


def write_timings_csv(path, rows) -> None:
    """``rows``: iterable of (method, domain_index, seconds)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", "domain_index", "seconds"])
        for method, idx, seconds in rows:
            writer.writerow([method, idx, repr(float(seconds))])


def read_timings_csv(path) -> list[tuple[str, int, float]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [(r["method"], int(r["domain_index"]), float(r["seconds"]))
                for r in reader]


def write_metrics_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
