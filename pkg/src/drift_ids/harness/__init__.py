"""Experiment orchestration: configs, the domain-incremental loop, suites, CLI."""

from .config import (
    DataConfig,
    ExperimentConfig,
    SCENARIOS,
    SuiteConfig,
    experiment_config_from_dict,
    load_domains,
    load_experiment_config,
    load_suite_config,
    suite_config_from_dict,
)
from .experiment import (
    ExperimentRecord,
    evaluate_model,
    generalizability_scores,
    order_domains,
    run_experiment,
)
from .suite import build_report, record_dir, run_suite
from .validate import run_validation

__all__ = [
    "DataConfig", "ExperimentConfig", "ExperimentRecord", "SCENARIOS",
    "SuiteConfig", "build_report", "evaluate_model",
    "experiment_config_from_dict", "generalizability_scores", "load_domains",
    "load_experiment_config", "load_suite_config", "order_domains",
    "record_dir", "run_experiment", "run_suite", "run_validation",
    "suite_config_from_dict",
]
