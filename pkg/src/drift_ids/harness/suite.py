"""Suite runner: the methods x scenarios x seeds grid plus the merged report.

Layout under the suite's output directory:
    records/<method>_<scenario>/seed<k>/{perf_matrix.csv, timings.csv,
                                         metrics.json, config.json,
                                         telemetry.json}
    report/{table1.csv, table2.csv, bwt_curves.csv, suite_summary.json,
            bwt_curves.png, tradeoff.png}
    generalizability_seed<k>.json

Per-record metrics.json contains only seed-deterministic values; everything
derived from wall-clock timing (TE) lives in the report files, which are
recomputed from the persisted timings.csv rows.
"""

from __future__ import annotations

import csv
import json
import os
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from ..clmetrics import TimingTable, read_timings_csv, training_efficiency, write_metrics_json
from ..errors import ConfigError
from .config import ExperimentConfig, SuiteConfig, load_domains
from .experiment import generalizability_scores, order_domains, run_experiment
from . import figures

THREADS_ENV = "DRIFT_IDS_THREADS"


def _thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def record_dir(out_dir, method: str, scenario: str, seed: int) -> Path:
    return Path(out_dir) / "records" / f"{method}_{scenario}" / f"seed{seed}"


def run_suite(suite: SuiteConfig) -> dict:
    """Run the full grid and render the merged report."""
    out = Path(suite.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    threads = _thread_count()
    needs_scores = any(s != "random" for s in suite.scenarios)

    jobs = []
    for seed in suite.seeds:
        domains = load_domains(suite.data, seed)
        scores = None
        if needs_scores:
            scores = generalizability_scores(domains, suite.model, suite.train,
                                             seed, suite.metric_kind)
            write_metrics_json(out / f"generalizability_seed{seed}.json", scores)
        for scenario in suite.scenarios:
            ordering = order_domains(domains, scores, scenario, seed)
            for name, params in suite.strategies:
                config = ExperimentConfig(
                    seed=seed, scenario=scenario, strategy_name=name,
                    strategy_params=params, metric_kind=suite.metric_kind,
                    epsilon=suite.epsilon, budget=suite.budget,
                    model=suite.model, train=suite.train, data=suite.data,
                    out_dir=str(record_dir(out, name, scenario, seed)))
                jobs.append((config, domains, ordering, scores))

    if threads == 1:
        for config, domains, ordering, scores in jobs:
            run_experiment(config, domains=domains, ordering=ordering,
                           scores=scores)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(run_experiment, config, domains=domains,
                                   ordering=ordering, scores=scores)
                       for config, domains, ordering, scores in jobs]
            for f in futures:
                f.result()

    return build_report(out, parallelism=threads)


def _scan_records(out_dir: Path):
    """Yield (method, scenario, seed, metrics, timings rows) for every record."""
    records_root = out_dir / "records"
    if not records_root.is_dir():
        raise ConfigError(f"no records directory under {out_dir}")
    for method_dir in sorted(records_root.iterdir()):
        if not method_dir.is_dir() or "_" not in method_dir.name:
            continue
        method, scenario = method_dir.name.rsplit("_", 1)
        for seed_dir in sorted(method_dir.iterdir()):
            if not seed_dir.is_dir() or not seed_dir.name.startswith("seed"):
                continue
            seed = int(seed_dir.name[4:])
            with open(seed_dir / "metrics.json", encoding="utf-8") as fh:
                metrics = json.load(fh)
            timings = read_timings_csv(seed_dir / "timings.csv")
            yield method, scenario, seed, metrics, timings


def build_report(out_dir, parallelism: int = 1) -> dict:
    """Render tables, curves, and figures from persisted records only."""
    out_dir = Path(out_dir)
    report_dir = out_dir / "report"
    report_dir.mkdir(parents=True, exist_ok=True)

    stability = defaultdict(list)      # (method, scenario) -> values over seeds
    plasticity_vals = defaultdict(list)
    per_attack = defaultdict(lambda: defaultdict(list))  # method -> attack -> vals
    bwt_rows = []
    timing_rows = defaultdict(dict)    # (scenario, seed) -> method -> [seconds]
    methods_seen = []
    scenarios_seen = []

    for method, scenario, seed, metrics, timings in _scan_records(out_dir):
        if method not in methods_seen:
            methods_seen.append(method)
        if scenario not in scenarios_seen:
            scenarios_seen.append(scenario)
        if metrics.get("stability") is not None:
            stability[(method, scenario)].append(metrics["stability"])
            plasticity_vals[(method, scenario)].append(metrics["plasticity"])
        for attack, vals in metrics.get("per_attack", {}).items():
            per_attack[method][attack].append((vals["f1"], vals["auc"]))
        for t, bwt in enumerate(metrics.get("bwt_per_step", []), start=2):
            bwt_rows.append((scenario, method, seed, t, bwt))
        timing_rows[(scenario, seed)][method] = [s for _, _, s in timings]

    # training efficiency within each (scenario, seed), then averaged over seeds
    te_values = defaultdict(list)
    for (scenario, seed), per_method in sorted(timing_rows.items()):
        table = TimingTable()
        for method, seconds in sorted(per_method.items()):
            table.add(method, seconds)
        for method, te in training_efficiency(table).items():
            te_values[(method, scenario)].append(te)

    table2_rows = []
    for method in methods_seen:
        for scenario in scenarios_seen:
            key = (method, scenario)
            if key not in stability:
                continue
            table2_rows.append({
                "method": method,
                "scenario": scenario,
                "stability": float(np.mean(stability[key])),
                "plasticity": float(np.mean(plasticity_vals[key])),
                "te": float(np.mean(te_values[key])) if key in te_values else None,
            })

    table1_rows = []
    for method in methods_seen:
        for attack in sorted(per_attack[method]):
            vals = per_attack[method][attack]
            table1_rows.append({
                "method": method,
                "attack": attack,
                "f1": float(np.mean([v[0] for v in vals])),
                "auc": float(np.mean([v[1] for v in vals])),
            })

    with open(report_dir / "table1.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", "attack", "f1", "auc"])
        for row in table1_rows:
            writer.writerow([row["method"], row["attack"],
                             repr(row["f1"]), repr(row["auc"])])

    with open(report_dir / "table2.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", "scenario", "stability", "plasticity", "te"])
        for row in table2_rows:
            writer.writerow([row["method"], row["scenario"],
                             repr(row["stability"]), repr(row["plasticity"]),
                             "" if row["te"] is None else repr(row["te"])])

    with open(report_dir / "bwt_curves.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["scenario", "method", "seed", "domain_index", "bwt"])
        for scenario, method, seed, t, bwt in bwt_rows:
            writer.writerow([scenario, method, seed, t, repr(bwt)])

    summary = {
        "methods": methods_seen,
        "scenarios": scenarios_seen,
        "table1": table1_rows,
        "table2": table2_rows,
        "parallelism": parallelism,
        "te_note": ("TE derives from wall-clock timings and is not "
                    "byte-reproducible across runs; per-record metrics.json "
                    "holds only seed-deterministic values"),
    }
    write_metrics_json(report_dir / "suite_summary.json", summary)

    figures.render_bwt_curves(bwt_rows, report_dir / "bwt_curves.png")
    figures.render_tradeoff(table2_rows, report_dir / "tradeoff.png")
    return summary
