"""Deterministic synthetic sink-log generator for RPL attack domains.

This is an explicit stand-in for a protocol simulator: per-node counters are
sampled from seeded Poisson/Gaussian baselines, then the attacker effect,
scaled by the per-minute intensity profile, transforms the sampled values.
Baseline draws come from a stream that never depends on the attack
configuration, so the pre-attack portion of a run is bit-identical to a pure
baseline run with the same seed. Attack-side randomness uses a separate
stream.

Signature effects at full intensity:
  BH  - attacker rank collapses to 10% of baseline; nearby DIO traffic drops.
  DF  - attacker DIS output inflated x(1 + K*lambda), K = 9; network answers
        with elevated DIO.
  WP  - non-attacker ranks pushed upward with inflated cross-node variance.
  LR  - repair bursts multiply DIO/DIS churn x6 and reset ranks upward.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .dataplane import (
    ATTACKS,
    VARIANTS,
    DomainDataset,
    NodeMinuteRecord,
    assemble_domain,
    write_sink_log,
)
from .errors import ConfigError, DataError

NETWORK_SIZES = (5, 10, 15, 20)

DF_INFLATION = 9.0        # K: DIS multiplier is (1 + K*lambda)
BH_RANK_FLOOR_LOW = 0.55  # attacker rank drops to a per-run fraction of
BH_RANK_FLOOR_HIGH = 0.95  # baseline drawn from this range (impact varies
                           # with attacker position and configuration)
WP_RANK_SHIFT = 0.15      # mean upward rank push, fraction of baseline
WP_RANK_NOISE = 0.20      # extra |N(0,1)|-scaled rank noise, fraction of baseline
LR_BURST_FACTOR = 6.0     # DIO/DIS multiplier during a repair burst
LR_BURST_PROB = 0.6       # per-minute burst probability at lambda = 1
LR_RANK_RESET = 1.4       # rank multiplier during a burst


@dataclass(frozen=True)
class DomainSpec:
    """Recipe for one synthetic domain."""

    attack: str
    variant: str = "base"
    network_size: int = 5
    runs: int = 20
    minutes_per_run: int = 120
    attack_start_minute: int = 30
    onoff_period: int = 10
    gradual_ramp_minutes: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.attack not in ATTACKS:
            raise ConfigError(f"unknown attack {self.attack!r}; expected one of {ATTACKS}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.network_size not in NETWORK_SIZES:
            raise ConfigError(f"network_size must be one of {NETWORK_SIZES}")
        if self.runs < 2:
            raise ConfigError("runs must be >= 2")
        if not 0 <= self.attack_start_minute < self.minutes_per_run:
            raise ConfigError("attack_start_minute must fall inside the run")
        if self.onoff_period < 1 or self.gradual_ramp_minutes < 1:
            raise ConfigError("onoff_period and gradual_ramp_minutes must be >= 1")

    @property
    def domain_id(self) -> str:
        return f"{self.attack}-{self.variant}-n{self.network_size}"

    def to_dict(self) -> dict:
        return {
            "attack": self.attack, "variant": self.variant,
            "network_size": self.network_size, "runs": self.runs,
            "minutes_per_run": self.minutes_per_run,
            "attack_start_minute": self.attack_start_minute,
            "onoff_period": self.onoff_period,
            "gradual_ramp_minutes": self.gradual_ramp_minutes,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "DomainSpec":
        return cls(**{k: payload[k] for k in cls.__dataclass_fields__ if k in payload})


@dataclass(frozen=True)
class IntensityProfile:
    """Per-minute attack intensity lambda(m) in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        if np.any(self.values < 0.0) or np.any(self.values > 1.0):
            raise DataError("intensity values must lie in [0, 1]")

    def __getitem__(self, minute: int) -> float:
        return float(self.values[minute])


def intensity_profile(spec: DomainSpec) -> IntensityProfile:
    """Build lambda(m) for the spec's variant.

    base: step 0 -> 1 at the start minute. onoff: square wave of the given
    period after the start. gradual: linear ramp (m - start) / ramp, capped
    at 1.
    """
    minutes = np.arange(spec.minutes_per_run)
    after = minutes >= spec.attack_start_minute
    if spec.variant == "base":
        lam = after.astype(np.float64)
    elif spec.variant == "onoff":
        phase = (minutes - spec.attack_start_minute) // spec.onoff_period
        lam = (after & (phase % 2 == 0)).astype(np.float64)
    else:  # gradual
        ramp = (minutes - spec.attack_start_minute) / spec.gradual_ramp_minutes
        lam = np.where(after, np.clip(ramp, 0.0, 1.0), 0.0)
    return IntensityProfile(values=lam)


@dataclass(frozen=True)
class NodeBehaviorModel:
    """Per-run node baselines: Poisson rates for counters, rank levels."""

    node_ids: np.ndarray
    attacker_ids: np.ndarray
    base_rank: np.ndarray
    dis_rate: np.ndarray
    dio_rate: np.ndarray
    dao_rate: np.ndarray
    dis_recv_rate: np.ndarray
    dio_recv_rate: np.ndarray

    def __post_init__(self):
        if self.attacker_ids.size < 1:
            raise DataError("behavior model needs at least one attacker")
        for rates in (self.dis_rate, self.dio_rate, self.dao_rate,
                      self.dis_recv_rate, self.dio_recv_rate):
            if np.any(rates <= 0.0):
                raise DataError("baseline rates must be positive")


def attacker_count(network_size: int) -> int:
    return max(1, network_size // 10)


def build_behavior_model(spec: DomainSpec, rng: np.random.Generator) -> NodeBehaviorModel:
    """Draw one run's node baselines. Consumes a fixed number of rng draws."""
    n = spec.network_size
    node_ids = np.arange(1, n + 1)
    # fixed hop pattern keeps cross-run rank variance low enough that rank
    # attacks stay separable when minutes are pooled over runs
    hops = 1 + (node_ids - 1) % 3
    base_rank = 128.0 * (1 + hops) + rng.normal(0.0, 10.0, size=n)
    base_rank = np.maximum(base_rank, 64.0)
    jitter = rng.uniform(0.8, 1.2, size=(5, n))
    neighbors = rng.integers(2, min(5, n + 1), size=n)
    attackers = rng.choice(node_ids, size=attacker_count(n), replace=False)
    return NodeBehaviorModel(
        node_ids=node_ids,
        attacker_ids=np.sort(attackers),
        base_rank=base_rank,
        dis_rate=2.0 * jitter[0],
        dio_rate=3.0 * jitter[1],
        dao_rate=1.0 * jitter[2],
        dis_recv_rate=0.9 * 2.0 * neighbors * jitter[3],
        dio_recv_rate=0.9 * 3.0 * neighbors * jitter[4],
    )


def generate_run(spec: DomainSpec, run_id: int) -> list[NodeMinuteRecord]:
    """Generate one run's records, bit-identical for a given (spec, run_id)."""
    rng = np.random.default_rng((spec.seed, run_id))
    attack_rng = np.random.default_rng((spec.seed, run_id, 7))
    model = build_behavior_model(spec, rng)
    lam = intensity_profile(spec)
    n = spec.network_size
    minutes = spec.minutes_per_run
    is_attacker = np.isin(model.node_ids, model.attacker_ids)

    # baseline draws for the whole run, independent of the attack config
    dis = rng.poisson(model.dis_rate, size=(minutes, n))
    dio = rng.poisson(model.dio_rate, size=(minutes, n))
    dao = rng.poisson(model.dao_rate, size=(minutes, n))
    dis_recv = rng.poisson(model.dis_recv_rate, size=(minutes, n))
    dio_recv = rng.poisson(model.dio_recv_rate, size=(minutes, n))
    walk = np.cumsum(rng.normal(0.0, 1.5, size=(minutes, n)), axis=0)
    rank = np.maximum(model.base_rank + rng.normal(0.0, 8.0, size=(minutes, n)) + walk,
                      32.0)

    dis = dis.astype(np.float64)
    dio = dio.astype(np.float64)
    dis_recv = dis_recv.astype(np.float64)
    dio_recv = dio_recv.astype(np.float64)

    bh_floor = float(attack_rng.uniform(BH_RANK_FLOOR_LOW, BH_RANK_FLOOR_HIGH)) \
        if spec.attack == "BH" else 1.0

    for m in range(minutes):
        lam_m = lam[m]
        if lam_m == 0.0:
            continue
        if spec.attack == "BH":
            rank[m, is_attacker] *= 1.0 - (1.0 - bh_floor) * lam_m
            dio[m, ~is_attacker] = np.rint(dio[m, ~is_attacker] * (1.0 - 0.05 * lam_m))
            dio_recv[m, ~is_attacker] = np.rint(
                dio_recv[m, ~is_attacker] * (1.0 - 0.10 * lam_m))
        elif spec.attack == "DF":
            dis[m, is_attacker] = np.rint(dis[m, is_attacker] * (1.0 + DF_INFLATION * lam_m))
            dio[m, :] = np.rint(dio[m, :] * (1.0 + 1.5 * lam_m))
            flood_heard = attack_rng.poisson(
                DF_INFLATION * lam_m * 2.0 * 0.8, size=int((~is_attacker).sum()))
            dis_recv[m, ~is_attacker] += flood_heard
        elif spec.attack == "WP":
            noise = np.abs(attack_rng.normal(0.0, 1.0, size=int((~is_attacker).sum())))
            push = WP_RANK_SHIFT + WP_RANK_NOISE * noise
            rank[m, ~is_attacker] *= 1.0 + lam_m * push
        else:  # LR
            burst = attack_rng.random() < LR_BURST_PROB * lam_m
            if burst:
                dio[m, :] = np.rint(dio[m, :] * LR_BURST_FACTOR)
                dis[m, :] = np.rint(dis[m, :] * LR_BURST_FACTOR)
                rank[m, :] *= LR_RANK_RESET
            else:
                dio[m, :] = np.rint(dio[m, :] * (1.0 + 0.5 * lam_m))

    rpl_total = dis + dio + dao
    records = []
    for m in range(minutes):
        active = lam[m] > 0.0
        for k in range(n):
            records.append(NodeMinuteRecord(
                run_id=run_id, minute=m, node_id=int(model.node_ids[k]),
                rank=float(rank[m, k]),
                dis_sent=int(dis[m, k]), dio_sent=int(dio[m, k]),
                dao_sent=int(dao[m, k]), dis_recv=int(dis_recv[m, k]),
                dio_recv=int(dio_recv[m, k]),
                rpl_total_sent=int(rpl_total[m, k]),
                attack_active=active))
    return records


def generate_domain_records(spec: DomainSpec) -> list[NodeMinuteRecord]:
    """All runs of a domain, each with its derived per-run seed."""
    records = []
    for run_id in range(spec.runs):
        records.extend(generate_run(spec, run_id))
    return records


def generate_domain(spec: DomainSpec, out_path) -> Path:
    """Write a domain's sink-log CSV; returns the path."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    try:
        write_sink_log(generate_domain_records(spec), out_path)
    except OSError as exc:
        raise DataError(f"cannot write sink log {out_path}: {exc}") from exc
    return out_path


def build_domain_dataset(spec: DomainSpec, split_ratio: float = 0.8,
                         window: int = 10, stride: int = 1) -> DomainDataset:
    """Generate and assemble a domain in one step (no CSV round trip)."""
    return assemble_domain(generate_domain_records(spec), spec.domain_id,
                           spec.attack, spec.variant, spec.network_size,
                           split_ratio=split_ratio, seed=spec.seed,
                           window=window, stride=stride)


def desk_suite_specs(seed: int = 0, network_size: int = 5, runs: int = 6,
                     minutes_per_run: int = 120) -> list[DomainSpec]:
    """The 12-domain desk-scale grid: 4 attacks x 3 variants, one size."""
    specs = []
    for attack in ATTACKS:
        for variant in VARIANTS:
            specs.append(DomainSpec(attack=attack, variant=variant,
                                    network_size=network_size, runs=runs,
                                    minutes_per_run=minutes_per_run,
                                    seed=seed))
    return specs


def baseline_spec(spec: DomainSpec) -> DomainSpec:
    """Same spec with the attack window pushed to the final minute, so every
    checked minute is pure baseline."""
    return replace(spec, attack_start_minute=spec.minutes_per_run - 1)


# ---------------------------------------------------------------------------
# Feature dump (t-SNE replacement: raw projection data for external tools)
# ---------------------------------------------------------------------------


def emit_feature_dump(domains, out_path) -> Path:
    """Concatenate all domains' windows into one labeled CSV.

    Rows: domain_id, run_id, end_minute, label, flattened W x 14 features.
    An empty domain list yields a header-only file with the default width.
    """
    out_path = Path(out_path)
    domains = list(domains)
    if domains:
        width = domains[0].train[0].features.size
    else:
        width = 10 * 14
    header = ["domain_id", "run_id", "end_minute", "label"] + [
        f"f{k:03d}" for k in range(1, width + 1)]
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for domain in domains:
            for w in list(domain.train) + list(domain.test):
                row = [domain.domain_id, w.source[0], w.source[1], w.label]
                row.extend(f"{v:.9g}" for v in w.features.ravel())
                writer.writerow(row)
    return out_path


def read_feature_dump(path) -> list[dict]:
    """Re-ingest a feature dump; returns one dict per row with a features array."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        feat_cols = [c for c in (reader.fieldnames or []) if c.startswith("f")]
        for row in reader:
            out.append({
                "domain_id": row["domain_id"],
                "run_id": int(row["run_id"]),
                "end_minute": int(row["end_minute"]),
                "label": int(row["label"]),
                "features": np.array([float(row[c]) for c in feat_cols]),
            })
    return out
