"""Domain-incremental experiment loop and its persistence.

The loop walks the ordered domain stream once. At step t it first evaluates
the incoming domain's test set (the pre-exposure entry Perf_{t-1,t} that the
plasticity metric needs), then trains with the strategy hooks attached, then
evaluates every domain seen so far (row t). Per-domain wall time covers
before_domain + training + after_domain, so strategy consolidation phases
(Fisher estimation, generator training) count toward the method's cost.
"""

from __future__ import annotations

import dataclasses
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..clmetrics import (
    DegenerateMetricWarning,
    PerfMatrix,
    auc_score,
    constraint_report,
    f1_score,
    perf_average,
    plasticity,
    stability_bwt,
    write_metrics_json,
    write_perf_matrix_csv,
    write_timings_csv,
)
from ..clstrat import make_strategy
from ..dataplane import DomainDataset
from ..errors import ConfigError, ContractError, DriftIdsError
from ..idsmodel import build_model, predict_scores, train_on_domain
from .config import ExperimentConfig, load_domains

ATTACK_THRESHOLD = 0.5


def evaluate_model(model, windows) -> tuple[float, float]:
    """(f1, auc) of the model on a window set."""
    scores, labels = predict_scores(model, windows)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateMetricWarning)
        f1 = f1_score((scores > ATTACK_THRESHOLD).astype(np.intp), labels)
    return f1, auc_score(scores, labels)


def generalizability_scores(domains, model_cfg, train_cfg, seed: int,
                            metric_kind: str = "auc") -> dict[str, float]:
    """g_d: train a fresh model on each domain alone, average its metric over
    every other domain's test split."""
    domains = list(domains)
    if len(domains) < 2:
        raise ConfigError("generalizability needs >= 2 domains")
    scores: dict[str, float] = {}
    for idx, domain in enumerate(domains):
        cfg = dataclasses.replace(model_cfg, seed=seed * 31 + idx)
        tcfg = dataclasses.replace(train_cfg, seed=seed * 31 + idx)
        model = build_model(cfg)
        train_on_domain(model, domain.train, tcfg, domain_index=0)
        values = []
        for other in domains:
            if other.domain_id == domain.domain_id:
                continue
            f1, auc = evaluate_model(model, other.test)
            values.append(auc if metric_kind == "auc" else f1)
        scores[domain.domain_id] = float(np.mean(values))
    return scores


def order_domains(domains, scores: dict[str, float] | None, scenario: str,
                  seed: int) -> list[DomainDataset]:
    """Arrange the stream: b2w/w2b by generalizability, seeded random, or
    toggle (alternating head/tail of the descending list). Ties break by
    domain_id ascending."""
    domains = sorted(domains, key=lambda d: d.domain_id)
    if scenario == "random":
        rng = np.random.default_rng((seed, 186))
        return [domains[i] for i in rng.permutation(len(domains))]
    if scenario not in ("b2w", "w2b", "toggle"):
        raise ConfigError(f"unknown scenario {scenario!r}")
    if scores is None:
        raise ContractError(f"scenario {scenario!r} needs generalizability scores")
    missing = [d.domain_id for d in domains if d.domain_id not in scores]
    if missing:
        raise ContractError(f"missing generalizability scores for {missing}")
    descending = sorted(domains, key=lambda d: (-scores[d.domain_id], d.domain_id))
    if scenario == "b2w":
        return descending
    if scenario == "w2b":
        return sorted(domains, key=lambda d: (scores[d.domain_id], d.domain_id))
    ordered = []
    lo, hi = 0, len(descending) - 1
    take_head = True
    while lo <= hi:
        if take_head:
            ordered.append(descending[lo])
            lo += 1
        else:
            ordered.append(descending[hi])
            hi -= 1
        take_head = not take_head
    return ordered


@dataclass
class ExperimentRecord:
    """Everything needed to reconstruct every reported number."""

    config: dict
    domain_order: list[str]
    cells: list[tuple[int, int, float, float]]  # (after, eval, f1, auc)
    timings: list[float]
    metrics: dict
    telemetry: dict
    out_dir: str | None = None

    def perf_matrix(self, metric_kind: str) -> PerfMatrix:
        matrix = PerfMatrix(len(self.domain_order), metric_kind=metric_kind)
        for i, j, f1, auc in self.cells:
            matrix.set(i, j, auc if metric_kind == "auc" else f1)
        return matrix


def _metrics_payload(config: ExperimentConfig, ordered_ids, matrix,
                     per_attack, report) -> dict:
    T = len(ordered_ids)
    payload = {
        "strategy": config.strategy_name,
        "scenario": config.scenario,
        "seed": config.seed,
        "metric_kind": config.metric_kind,
        "T": T,
        "domain_order": list(ordered_ids),
        "per_attack": per_attack,
        "constraint_report": report.to_dict(),
        # training efficiency needs all methods' wall times; a single record
        # cannot carry a reproducible TE. Timings live in timings.csv; the
        # suite report computes TE across methods.
        "te": None,
    }
    if T >= 2:
        s_bar, bwts = stability_bwt(matrix)
        payload.update({
            "average_performance": perf_average(matrix),
            "plasticity": plasticity(matrix),
            "stability": s_bar,
            "bwt_per_step": bwts,
        })
    else:
        payload.update({
            "average_performance": matrix.get(T, 1),
            "plasticity": None,
            "stability": None,
            "bwt_per_step": [],
            "note": "T=1: plasticity and stability are undefined",
        })
    return payload


def run_experiment(config: ExperimentConfig, domains=None, ordering=None,
                   scores=None) -> ExperimentRecord:
    """Run one strategy through one ordered domain stream.

    ``domains``/``ordering``/``scores`` may be passed in by the suite so all
    methods share identical DomainDataset objects and order; otherwise they
    are built from the config.
    """
    if domains is None:
        domains = load_domains(config.data, config.seed)
    if len(domains) < 1:
        raise ConfigError("experiment needs at least one domain")
    if ordering is None:
        if config.scenario != "random" and scores is None:
            scores = generalizability_scores(domains, config.model, config.train,
                                             config.seed, config.metric_kind)
        ordering = order_domains(domains, scores, config.scenario, config.seed)
    ordered = list(ordering)
    T = len(ordered)
    ordered_ids = [d.domain_id for d in ordered]

    model_cfg = dataclasses.replace(config.model, seed=config.seed)
    train_cfg = dataclasses.replace(config.train, seed=config.seed)
    model = build_model(model_cfg)
    strategy = make_strategy(config.strategy_name, config.strategy_params,
                             seed=config.seed)

    f1_matrix = PerfMatrix(T, metric_kind="f1")
    auc_matrix = PerfMatrix(T, metric_kind="auc")
    cells = []
    timings = []
    memory_series = []
    train_reads = []

    def record_cell(i, j, windows):
        f1, auc = evaluate_model(model, windows)
        f1_matrix.set(i, j, f1)
        auc_matrix.set(i, j, auc)
        cells.append((i, j, f1, auc))

    for t in range(1, T + 1):
        domain = ordered[t - 1]
        phase = "pre-evaluation"
        try:
            record_cell(t - 1, t, domain.test)
            phase = "training"
            started = time.perf_counter()
            strategy.before_domain(model, t - 1)
            train_on_domain(model, domain.train, train_cfg, hooks=strategy,
                            domain_index=t - 1)
            train_reads.append([t, domain.domain_id])
            strategy.after_domain(model, domain)
            timings.append(max(time.perf_counter() - started, 1e-9))
            memory_series.append((f"step_{t}", strategy.memory_samples()))
            phase = "evaluation"
            for i in range(1, t + 1):
                record_cell(t, i, ordered[i - 1].test)
        except DriftIdsError as exc:
            raise type(exc)(f"domain step {t} ({phase}): {exc}") from exc

    metric_matrix = auc_matrix if config.metric_kind == "auc" else f1_matrix
    per_attack: dict[str, dict[str, float]] = {}
    by_attack: dict[str, list[tuple[float, float]]] = {}
    for j in range(1, T + 1):
        attack = ordered[j - 1].attack
        by_attack.setdefault(attack, []).append(
            (f1_matrix.get(T, j), auc_matrix.get(T, j)))
    for attack, values in sorted(by_attack.items()):
        per_attack[attack] = {
            "f1": float(np.mean([v[0] for v in values])),
            "auc": float(np.mean([v[1] for v in values])),
        }

    if T >= 2:
        _, bwts = stability_bwt(metric_matrix)
    else:
        bwts = []
    report = constraint_report(memory_series, bwts, config.budget, config.epsilon)
    metrics = _metrics_payload(config, ordered_ids, metric_matrix, per_attack,
                               report)
    telemetry = {
        "memory_series": [[label, size] for label, size in memory_series],
        "train_reads": train_reads,
        "strategy": strategy.telemetry(),
    }

    record = ExperimentRecord(config=config.to_dict(), domain_order=ordered_ids,
                              cells=cells, timings=timings, metrics=metrics,
                              telemetry=telemetry, out_dir=config.out_dir)
    if config.out_dir:
        persist_record(record, Path(config.out_dir))
    return record


def persist_record(record: ExperimentRecord, out_dir: Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_perf_matrix_csv(out_dir / "perf_matrix.csv", record.cells)
    method = record.config["strategy"]["name"]
    write_timings_csv(out_dir / "timings.csv",
                      [(method, idx + 1, seconds)
                       for idx, seconds in enumerate(record.timings)])
    write_metrics_json(out_dir / "metrics.json", record.metrics)
    write_metrics_json(out_dir / "config.json", record.config)
    write_metrics_json(out_dir / "telemetry.json", record.telemetry)
