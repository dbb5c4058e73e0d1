"""Continual-learning benchmark for LSTM intrusion detection on RPL-style IoT traffic.

Subpackages and modules:
  numgrad    - float64 numeric core (LSTM cell, dense, losses, Adam, gradcheck)
  idsmodel   - the LSTM classifier, training loop with strategy hooks, checkpoints
  dataplane  - sink-log parsing, 14-dim features, normalization, windows, domains
  trafficgen - deterministic synthetic attack-domain generator
  clstrat    - naive / Replay / EWC / SI / LwF / Generative Replay strategies
  clmetrics  - F1, AUC, Perf matrix, plasticity, stability (BWT), TE, constraints
  harness    - experiment loop, suites, report rendering, CLI
"""

__version__ = "0.1.0"
