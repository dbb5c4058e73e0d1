"""Ingestion pipeline: sink logs -> per-minute features -> windows -> domains.

The sink-log CSV schema (one row per node per minute) is the canonical input
format. Per-minute aggregation computes the mean and population standard
deviation of the 7 RPL attributes across nodes, yielding the 14-dimensional
feature vector [mu1..mu7, sigma1..sigma7]. Features are min-max normalized
with statistics fitted on the training split only, then cut into fixed-length
sliding windows that never span run boundaries.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractError, DataError, SchemaError

ATTRIBUTES = ("rank", "dis_sent", "dio_sent", "dao_sent", "dis_recv",
              "dio_recv", "rpl_total_sent")
COUNT_ATTRIBUTES = ATTRIBUTES[1:]

SINK_LOG_COLUMNS = ("run_id", "minute", "node_id") + ATTRIBUTES + ("attack_active",)

ATTACKS = ("BH", "DF", "WP", "LR")
VARIANTS = ("base", "onoff", "gradual")

FEATURE_DIM = 14

_TRUE_STRINGS = {"1", "true", "yes"}
_FALSE_STRINGS = {"0", "false", "no"}


@dataclass(frozen=True)
class NodeMinuteRecord:
    """One node's per-minute report as logged at the sink."""

    run_id: int
    minute: int
    node_id: int
    rank: float
    dis_sent: int
    dio_sent: int
    dao_sent: int
    dis_recv: int
    dio_recv: int
    rpl_total_sent: int
    attack_active: bool

    def __post_init__(self):
        for name in COUNT_ATTRIBUTES:
            if getattr(self, name) < 0:
                raise DataError(f"negative count {name}={getattr(self, name)} "
                                f"(run {self.run_id}, minute {self.minute}, "
                                f"node {self.node_id})")
        if not np.isfinite(self.rank):
            raise DataError(f"non-finite rank (run {self.run_id}, minute "
                            f"{self.minute}, node {self.node_id})")

    def attribute_values(self) -> tuple[float, ...]:
        return tuple(float(getattr(self, a)) for a in ATTRIBUTES)


def _parse_bool(text: str, where: str) -> bool:
    t = text.strip().lower()
    if t in _TRUE_STRINGS:
        return True
    if t in _FALSE_STRINGS:
        return False
    raise DataError(f"{where}: cannot parse boolean {text!r}")


def load_column_map(path) -> dict[str, str]:
    """Loader-config JSON mapping external column names to the canonical ones.

    Schema: {"column_map": {"<external name>": "<canonical name>", ...}}.
    Canonical columns absent from the map are looked up under their own name.
    """
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    mapping = payload.get("column_map")
    if not isinstance(mapping, dict):
        raise SchemaError(f"{path}: missing 'column_map' object")
    unknown = set(mapping.values()) - set(SINK_LOG_COLUMNS)
    if unknown:
        raise SchemaError(f"{path}: column_map targets unknown columns {sorted(unknown)}")
    return {str(k): str(v) for k, v in mapping.items()}


def parse_sink_log(path, column_map: dict[str, str] | None = None) -> list[NodeMinuteRecord]:
    """Parse a sink-log CSV into records sorted by (run_id, minute, node_id).

    ``column_map`` renames external headers onto the canonical schema so the
    publicly released dataset can be ingested without code changes. Malformed
    rows raise with their 1-based line number.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected a header row") from None
        if column_map:
            header = [column_map.get(h, h) for h in header]
        positions = {}
        for col in SINK_LOG_COLUMNS:
            if col not in header:
                raise SchemaError(f"{path}: missing column {col!r}")
            positions[col] = header.index(col)

        records = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            where = f"{path}:{line_no}"
            if len(row) < len(header):
                raise DataError(f"{where}: expected {len(header)} fields, got {len(row)}")
            try:
                values = {col: row[positions[col]] for col in SINK_LOG_COLUMNS}
                record = NodeMinuteRecord(
                    run_id=int(values["run_id"]),
                    minute=int(values["minute"]),
                    node_id=int(values["node_id"]),
                    rank=float(values["rank"]),
                    dis_sent=int(values["dis_sent"]),
                    dio_sent=int(values["dio_sent"]),
                    dao_sent=int(values["dao_sent"]),
                    dis_recv=int(values["dis_recv"]),
                    dio_recv=int(values["dio_recv"]),
                    rpl_total_sent=int(values["rpl_total_sent"]),
                    attack_active=_parse_bool(values["attack_active"], where),
                )
            except ValueError as exc:
                raise DataError(f"{where}: malformed row ({exc})") from None
            except DataError as exc:
                raise DataError(f"{where}: {exc}") from None
            records.append(record)
    records.sort(key=lambda r: (r.run_id, r.minute, r.node_id))
    return records


def write_sink_log(records, path) -> None:
    """Write records in the canonical sink-log CSV schema (LF endings)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SINK_LOG_COLUMNS)
        for r in records:
            writer.writerow([r.run_id, r.minute, r.node_id, repr(float(r.rank)),
                             r.dis_sent, r.dio_sent, r.dao_sent, r.dis_recv,
                             r.dio_recv, r.rpl_total_sent,
                             1 if r.attack_active else 0])


# ---------------------------------------------------------------------------
# Feature extraction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureVector14:
    """Per-minute network feature: mean and population std of 7 attributes."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        if self.mu.shape != (7,) or self.sigma.shape != (7,):
            raise ContractError("FeatureVector14 needs 7 means and 7 stds")
        if np.any(self.sigma < 0):
            raise ContractError("standard deviations must be nonnegative")

    def values(self) -> np.ndarray:
        return np.concatenate([self.mu, self.sigma])


def aggregate_minute(records) -> FeatureVector14:
    """Aggregate one (run, minute) group of node records.

    Uses the population standard deviation (divide by n) so a single node
    yields sigma = 0.
    """
    records = list(records)
    if not records:
        raise DataError("cannot aggregate an empty minute group")
    keys = {(r.run_id, r.minute) for r in records}
    if len(keys) != 1:
        raise ContractError(f"records span multiple (run, minute) groups: {sorted(keys)}")
    table = np.array([r.attribute_values() for r in records], dtype=np.float64)
    return FeatureVector14(mu=table.mean(axis=0), sigma=table.std(axis=0))


@dataclass(frozen=True)
class NormStats:
    """Per-feature min/max, remembering what they were fitted on."""

    minimum: np.ndarray
    maximum: np.ndarray
    fitted_on: str

    def __post_init__(self):
        if self.minimum.shape != (FEATURE_DIM,) or self.maximum.shape != (FEATURE_DIM,):
            raise ContractError(f"NormStats needs {FEATURE_DIM} mins and maxes")
        if np.any(self.maximum < self.minimum):
            raise ContractError("max < min in normalization statistics")

    def to_dict(self) -> dict:
        return {"minimum": self.minimum.tolist(), "maximum": self.maximum.tolist(),
                "fitted_on": self.fitted_on}

    @classmethod
    def from_dict(cls, payload: dict) -> "NormStats":
        return cls(minimum=np.asarray(payload["minimum"], dtype=np.float64),
                   maximum=np.asarray(payload["maximum"], dtype=np.float64),
                   fitted_on=str(payload["fitted_on"]))


def minmax_fit(vectors, fitted_on: str = "unspecified") -> NormStats:
    """Fit per-feature min/max on an (N, 14) array of raw feature vectors."""
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != FEATURE_DIM or arr.shape[0] < 1:
        raise DataError(f"expected a nonempty (N, {FEATURE_DIM}) array, got {arr.shape}")
    return NormStats(minimum=arr.min(axis=0), maximum=arr.max(axis=0),
                     fitted_on=fitted_on)


def minmax_apply(vectors, stats: NormStats) -> np.ndarray:
    """(v - min) / (max - min) per feature, clipped to [0, 1].

    Features with max == min map to 0.
    """
    arr = np.asarray(vectors, dtype=np.float64)
    span = stats.maximum - stats.minimum
    safe_span = np.where(span == 0.0, 1.0, span)
    out = (arr - stats.minimum) / safe_span
    out = np.where(span == 0.0, 0.0, out)
    return np.clip(out, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Windows and domains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureWindow:
    """W x 14 matrix of normalized features; label = last minute's status."""

    features: np.ndarray
    label: int
    source: tuple[int, int]  # (run_id, end_minute)

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[1] != FEATURE_DIM:
            raise ContractError(f"window features must be (W, {FEATURE_DIM})")
        if np.any(self.features < 0.0) or np.any(self.features > 1.0):
            raise DataError("window entries fall outside [0, 1]; normalize first")
        if self.label not in (0, 1):
            raise DataError(f"label must be 0 or 1, got {self.label}")


def windowize(features, labels, minutes, run_id: int, window: int,
              stride: int = 1) -> list[FeatureWindow]:
    """Sliding windows over one run's minute-ordered normalized features.

    A sequence shorter than ``window`` yields zero windows (with a warning).
    The window label is the final minute's label, by design: the detector
    answers "is the network under attack now".
    """
    feats = np.asarray(features, dtype=np.float64)
    labs = np.asarray(labels).astype(np.intp)
    mins = np.asarray(minutes).astype(np.intp)
    if window < 1 or stride < 1:
        raise DataError("window and stride must be >= 1")
    if feats.shape[0] != labs.shape[0] or feats.shape[0] != mins.shape[0]:
        raise ContractError("features, labels, and minutes must align")
    n = feats.shape[0]
    if n < window:
        warnings.warn(f"run {run_id}: {n} minutes < window {window}; no windows",
                      stacklevel=2)
        return []
    out = []
    for end in range(window - 1, n, stride):
        start = end - window + 1
        out.append(FeatureWindow(features=feats[start:end + 1].copy(),
                                 label=int(labs[end]),
                                 source=(run_id, int(mins[end]))))
    return out


def stack_windows(windows) -> tuple[np.ndarray, np.ndarray]:
    """Stack FeatureWindows into (X of shape (B, W, 14), y of shape (B,))."""
    windows = list(windows)
    if not windows:
        raise DataError("cannot stack an empty window list")
    X = np.stack([w.features for w in windows])
    y = np.array([w.label for w in windows], dtype=np.intp)
    return X, y


@dataclass(frozen=True)
class DomainDataset:
    """One domain's train/test windows plus provenance and normalization."""

    domain_id: str
    attack: str
    variant: str
    network_size: int
    train: tuple[FeatureWindow, ...]
    test: tuple[FeatureWindow, ...]
    norm: NormStats
    seed: int = 0
    train_run_ids: tuple[int, ...] = ()
    test_run_ids: tuple[int, ...] = ()

    def __post_init__(self):
        if self.attack not in ATTACKS:
            raise DataError(f"unknown attack {self.attack!r}")
        if self.variant not in VARIANTS:
            raise DataError(f"unknown variant {self.variant!r}")
        if not self.train or not self.test:
            raise DataError(f"domain {self.domain_id}: both splits must be nonempty")
        overlap = set(self.train_run_ids) & set(self.test_run_ids)
        if overlap:
            raise DataError(f"domain {self.domain_id}: splits share runs {sorted(overlap)}")
        for split_name, split in (("train", self.train), ("test", self.test)):
            labels = {w.label for w in split}
            if labels != {0, 1}:
                raise DataError(
                    f"domain {self.domain_id}: {split_name} split is single-class; "
                    "AUC would be undefined downstream")


def _run_sequences(records) -> dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Group records into per-run (minutes, raw features (M, 14), labels)."""
    by_run: dict[int, dict[int, list[NodeMinuteRecord]]] = {}
    for r in records:
        by_run.setdefault(r.run_id, {}).setdefault(r.minute, []).append(r)
    out = {}
    for run_id, minutes in by_run.items():
        ordered = sorted(minutes)
        feats = np.stack([aggregate_minute(minutes[m]).values() for m in ordered])
        labels = np.array([int(any(r.attack_active for r in minutes[m]))
                           for m in ordered], dtype=np.intp)
        out[run_id] = (np.array(ordered, dtype=np.intp), feats, labels)
    return out


def assemble_domain(records, domain_id: str, attack: str, variant: str,
                    network_size: int, split_ratio: float = 0.8, seed: int = 0,
                    window: int = 10, stride: int = 1) -> DomainDataset:
    """Build a DomainDataset from sink-log records.

    Runs are shuffled with the seed and split train/test by run (default
    80/20) so no temporal leakage crosses the split. Normalization statistics
    come from the train split's per-minute features only and are applied to
    both splits.
    """
    if not 0.0 < split_ratio < 1.0:
        raise DataError(f"split_ratio must lie in (0, 1), got {split_ratio}")
    sequences = _run_sequences(records)
    run_ids = sorted(sequences)
    if len(run_ids) < 2:
        raise DataError(f"domain {domain_id}: needs >= 2 runs, got {len(run_ids)}")
    rng = np.random.default_rng(seed)
    shuffled = [run_ids[i] for i in rng.permutation(len(run_ids))]
    n_train = min(max(int(round(split_ratio * len(run_ids))), 1), len(run_ids) - 1)
    train_runs = sorted(shuffled[:n_train])
    test_runs = sorted(shuffled[n_train:])

    train_minutes = np.concatenate([sequences[r][1] for r in train_runs])
    norm = minmax_fit(train_minutes, fitted_on=f"{domain_id}/train")

    def cut(run_list):
        out = []
        for run_id in run_list:
            minutes, feats, labels = sequences[run_id]
            out.extend(windowize(minmax_apply(feats, norm), labels, minutes,
                                 run_id, window, stride))
        return tuple(out)

    return DomainDataset(domain_id=domain_id, attack=attack, variant=variant,
                         network_size=network_size, train=cut(train_runs),
                         test=cut(test_runs), norm=norm, seed=seed,
                         train_run_ids=tuple(train_runs),
                         test_run_ids=tuple(test_runs))


# ---------------------------------------------------------------------------
# Domain feature cache (CSV + sidecar JSON)
# ---------------------------------------------------------------------------


def _window_rows(split):
    for w in split:
        yield w.source[0], w.source[1], w.label, w.features


def save_domain_features(domain: DomainDataset, csv_path) -> None:
    """Cache a domain as per-window rows (flattened features at 9 significant
    digits) plus a sidecar JSON holding NormStats and split metadata."""
    csv_path = Path(csv_path)
    width = domain.train[0].features.shape[0] * FEATURE_DIM
    header = ["run_id", "end_minute", "split", "label"] + [
        f"f{k:02d}" for k in range(1, width + 1)]
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for split_name, split in (("train", domain.train), ("test", domain.test)):
            for run_id, end_minute, label, feats in _window_rows(split):
                row = [run_id, end_minute, split_name, label]
                row.extend(f"{v:.9g}" for v in feats.ravel())
                writer.writerow(row)
    sidecar = {
        "domain_id": domain.domain_id,
        "attack": domain.attack,
        "variant": domain.variant,
        "network_size": domain.network_size,
        "seed": domain.seed,
        "window": domain.train[0].features.shape[0],
        "train_run_ids": list(domain.train_run_ids),
        "test_run_ids": list(domain.test_run_ids),
        "norm": domain.norm.to_dict(),
    }
    with open(csv_path.with_suffix(".json"), "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_domain_features(csv_path) -> DomainDataset:
    """Rebuild a DomainDataset from its feature cache."""
    csv_path = Path(csv_path)
    with open(csv_path.with_suffix(".json"), encoding="utf-8") as fh:
        meta = json.load(fh)
    window = int(meta["window"])
    splits: dict[str, list[FeatureWindow]] = {"train": [], "test": []}
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or reader.fieldnames[:4] != [
                "run_id", "end_minute", "split", "label"]:
            raise SchemaError(f"{csv_path}: unexpected feature-cache header")
        feat_cols = reader.fieldnames[4:]
        if len(feat_cols) != window * FEATURE_DIM:
            raise SchemaError(f"{csv_path}: expected {window * FEATURE_DIM} "
                              f"feature columns, got {len(feat_cols)}")
        for row in reader:
            feats = np.array([float(row[c]) for c in feat_cols],
                             dtype=np.float64).reshape(window, FEATURE_DIM)
            splits[row["split"]].append(FeatureWindow(
                features=feats, label=int(row["label"]),
                source=(int(row["run_id"]), int(row["end_minute"]))))
    return DomainDataset(
        domain_id=meta["domain_id"], attack=meta["attack"],
        variant=meta["variant"], network_size=int(meta["network_size"]),
        train=tuple(splits["train"]), test=tuple(splits["test"]),
        norm=NormStats.from_dict(meta["norm"]), seed=int(meta["seed"]),
        train_run_ids=tuple(meta["train_run_ids"]),
        test_run_ids=tuple(meta["test_run_ids"]))
