"""Command-line interface.

Subcommands: gen (synthetic sink logs), ingest (logs -> feature cache),
score (generalizability), run (one experiment), suite (full grid), report
(re-render from persisted records), validate (gradient + metric oracles).
Exit codes: 0 success, 1 one-line machine-parsable error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..dataplane import assemble_domain, load_column_map, parse_sink_log, save_domain_features
from ..errors import DriftIdsError
from ..trafficgen import DomainSpec, generate_domain
from .config import (
    load_domains,
    load_experiment_config,
    load_suite_config,
)
from .experiment import generalizability_scores, run_experiment
from .suite import build_report, run_suite
from .validate import THRESHOLDS, run_validation


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drift-ids",
        description="Continual-learning IDS benchmark for RPL-style IoT traffic")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic domain's sink log")
    gen.add_argument("--spec-json", default=None,
                     help="DomainSpec JSON file (overrides the flags below)")
    gen.add_argument("--attack", default=None, choices=["BH", "DF", "WP", "LR"])
    gen.add_argument("--variant", default="base",
                     choices=["base", "onoff", "gradual"])
    gen.add_argument("--size", type=int, default=5, dest="network_size")
    gen.add_argument("--runs", type=int, default=20)
    gen.add_argument("--minutes", type=int, default=120)
    gen.add_argument("--attack-start", type=int, default=30)
    gen.add_argument("--onoff-period", type=int, default=10)
    gen.add_argument("--gradual-ramp", type=int, default=20)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="sink-log CSV path")

    ingest = sub.add_parser("ingest", help="sink log -> domain feature cache")
    ingest.add_argument("--log", required=True)
    ingest.add_argument("--attack", required=True, choices=["BH", "DF", "WP", "LR"])
    ingest.add_argument("--variant", default="base",
                        choices=["base", "onoff", "gradual"])
    ingest.add_argument("--size", type=int, default=5, dest="network_size")
    ingest.add_argument("--domain-id", default=None)
    ingest.add_argument("--column-map", default=None,
                        help="JSON mapping external column names to the schema")
    ingest.add_argument("--split", type=float, default=0.8)
    ingest.add_argument("--window", type=int, default=10)
    ingest.add_argument("--stride", type=int, default=1)
    ingest.add_argument("--seed", type=int, default=0)
    ingest.add_argument("--out", required=True, help="output directory")

    score = sub.add_parser("score", help="per-domain generalizability scores")
    score.add_argument("--config", required=True)
    score.add_argument("--out", default=None, help="JSON output path")

    run = sub.add_parser("run", help="run a single experiment")
    run.add_argument("--config", required=True)
    run.add_argument("--out", default=None, help="override output directory")
    run.add_argument("--seed", type=int, default=None, help="override seed")

    suite = sub.add_parser("suite", help="run the full methods x scenarios grid")
    group = suite.add_mutually_exclusive_group(required=True)
    group.add_argument("--config", default=None)
    group.add_argument("--preset", choices=["desk"], default=None,
                       help="packaged desk-scale 12-domain benchmark")
    suite.add_argument("--out", default=None, help="override output directory")

    report = sub.add_parser("report", help="re-render report from records")
    report.add_argument("--records", required=True,
                        help="suite output directory holding records/")

    validate = sub.add_parser("validate",
                              help="gradient correctness and metric oracles")
    validate.add_argument("--seed", type=int, default=0)
    return parser


def _cmd_gen(args) -> int:
    if args.spec_json:
        with open(args.spec_json, encoding="utf-8") as fh:
            spec = DomainSpec.from_dict(json.load(fh))
    elif args.attack is None:
        print("drift-ids: error: ConfigError: gen needs --attack or --spec-json",
              file=sys.stderr)
        return 1
    else:
        spec = DomainSpec(attack=args.attack, variant=args.variant,
                          network_size=args.network_size, runs=args.runs,
                          minutes_per_run=args.minutes,
                          attack_start_minute=args.attack_start,
                          onoff_period=args.onoff_period,
                          gradual_ramp_minutes=args.gradual_ramp, seed=args.seed)
    path = generate_domain(spec, args.out)
    print(f"wrote {path} ({spec.runs} runs x {spec.minutes_per_run} minutes "
          f"x {spec.network_size} nodes)")
    return 0


def _cmd_ingest(args) -> int:
    column_map = load_column_map(args.column_map) if args.column_map else None
    records = parse_sink_log(args.log, column_map=column_map)
    domain_id = args.domain_id or f"{args.attack}-{args.variant}-n{args.network_size}"
    domain = assemble_domain(records, domain_id, args.attack, args.variant,
                             args.network_size, split_ratio=args.split,
                             seed=args.seed, window=args.window,
                             stride=args.stride)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{domain_id}.csv"
    save_domain_features(domain, csv_path)
    print(f"wrote {csv_path} (train {len(domain.train)} / test "
          f"{len(domain.test)} windows)")
    return 0


def _cmd_score(args) -> int:
    config = load_experiment_config(args.config)
    domains = load_domains(config.data, config.seed)
    scores = generalizability_scores(domains, config.model, config.train,
                                     config.seed, config.metric_kind)
    for domain_id in sorted(scores):
        print(f"{domain_id}\t{scores[domain_id]:.6f}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(scores, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"wrote {args.out}")
    return 0


def _cmd_run(args) -> int:
    config = load_experiment_config(args.config)
    if args.out is not None or args.seed is not None:
        import dataclasses
        if args.out is not None:
            config = dataclasses.replace(config, out_dir=args.out)
        if args.seed is not None:
            config = dataclasses.replace(config, seed=args.seed)
    record = run_experiment(config)
    metrics = record.metrics
    print(f"strategy={config.strategy_name} scenario={config.scenario} "
          f"seed={config.seed} T={metrics['T']}")
    print(f"avg_performance={metrics['average_performance']:.4f} "
          f"stability={metrics['stability']} plasticity={metrics['plasticity']}")
    if record.out_dir:
        print(f"record: {record.out_dir}")
    return 0


def _cmd_suite(args) -> int:
    if args.preset == "desk":
        from .desk import desk_suite_config
        suite = desk_suite_config(args.out or "desk_suite_out")
    else:
        suite = load_suite_config(args.config)
    if args.out is not None:
        import dataclasses
        suite = dataclasses.replace(suite, out_dir=args.out)
    summary = run_suite(suite)
    print(f"{'method':<8} {'scenario':<8} {'S':>8} {'P':>8} {'TE':>8}")
    for row in summary["table2"]:
        te = f"{row['te']:.3f}" if row["te"] is not None else "-"
        print(f"{row['method']:<8} {row['scenario']:<8} "
              f"{row['stability']:>8.3f} {row['plasticity']:>8.3f} {te:>8}")
    print(f"report: {Path(suite.out_dir) / 'report'}")
    return 0


def _cmd_report(args) -> int:
    summary = build_report(Path(args.records))
    print(f"rendered report for {len(summary['methods'])} methods x "
          f"{len(summary['scenarios'])} scenarios under "
          f"{Path(args.records) / 'report'}")
    return 0


def _cmd_validate(args) -> int:
    outcome = run_validation(seed=args.seed)
    for name, value in outcome["results"].items():
        threshold = THRESHOLDS[name]
        status = "PASS" if value <= threshold else "FAIL"
        print(f"{name}: {value:.3e} (threshold {threshold:.0e}) {status}")
    print(f"max gradient error: "
          f"{max(outcome['results'][k] for k in ('classifier_fd', 'ewc_penalty_fd', 'si_penalty_fd', 'lwf_distillation_fd')):.3e}")
    return 0 if outcome["ok"] else 1


_COMMANDS = {
    "gen": _cmd_gen,
    "ingest": _cmd_ingest,
    "score": _cmd_score,
    "run": _cmd_run,
    "suite": _cmd_suite,
    "report": _cmd_report,
    "validate": _cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return _COMMANDS[args.command](args)
    except DriftIdsError as exc:
        print(f"drift-ids: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"drift-ids: error: OSError: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
