import time

import numpy as np
import pytest

from drift_ids.dataplane import parse_sink_log
from drift_ids.errors import ConfigError
from drift_ids.trafficgen import (
    DomainSpec,
    baseline_spec,
    build_domain_dataset,
    desk_suite_specs,
    emit_feature_dump,
    generate_domain,
    generate_domain_records,
    generate_run,
    intensity_profile,
    read_feature_dump,
)

# signature attribute -> index in the 14-dim vector [mu1..mu7, sigma1..sigma7]
MU_RANK, MU_DIS, MU_DIO = 0, 1, 2


def minute_features(records):
    """Per-minute (feature matrix, labels) pooled over runs."""
    from drift_ids.dataplane import _run_sequences
    feats, labels = [], []
    for _, f, l in _run_sequences(records).values():
        feats.append(f)
        labels.append(l)
    return np.concatenate(feats), np.concatenate(labels)


def stump_accuracy(values, labels):
    """Best threshold/direction accuracy of a one-feature decision stump."""
    order = np.argsort(values)
    v = values[order]
    y = labels[order]
    n = y.size
    pos_left = np.concatenate([[0], np.cumsum(y)])
    total_pos = pos_left[-1]
    best = max(total_pos, n - total_pos) / n  # constant classifiers
    for cut in range(1, n):
        if v[cut] == v[cut - 1]:
            continue
        # predict 1 on the right of the cut, or 1 on the left
        right_as_pos = (total_pos - pos_left[cut]) + (cut - pos_left[cut])
        left_as_pos = pos_left[cut] + (n - cut) - (total_pos - pos_left[cut])
        best = max(best, right_as_pos / n, left_as_pos / n)
    return best


class TestIntensityProfile:
    def test_base_step(self):
        spec = DomainSpec(attack="BH", variant="base", attack_start_minute=30,
                          minutes_per_run=120)
        lam = intensity_profile(spec)
        assert lam[29] == 0.0 and lam[30] == 1.0 and lam[119] == 1.0

    def test_onoff_square_wave(self):
        spec = DomainSpec(attack="DF", variant="onoff", attack_start_minute=30,
                          onoff_period=10, minutes_per_run=120)
        lam = intensity_profile(spec)
        assert all(lam[m] == 1.0 for m in range(30, 40))
        assert all(lam[m] == 0.0 for m in range(40, 50))
        assert all(lam[m] == 1.0 for m in range(50, 60))

    def test_gradual_linear_midpoint(self):
        spec = DomainSpec(attack="WP", variant="gradual", attack_start_minute=30,
                          gradual_ramp_minutes=20, minutes_per_run=120)
        lam = intensity_profile(spec)
        assert lam[40] == 0.5
        assert lam[50] == 1.0 and lam[80] == 1.0
        assert lam[29] == 0.0

    def test_zero_before_start_for_all_variants(self):
        for variant in ("base", "onoff", "gradual"):
            spec = DomainSpec(attack="LR", variant=variant,
                              attack_start_minute=40, minutes_per_run=100)
            lam = intensity_profile(spec)
            assert all(lam[m] == 0.0 for m in range(40))


class TestGenerateRun:
    def test_deterministic(self):
        spec = DomainSpec(attack="DF", runs=2, minutes_per_run=40,
                          attack_start_minute=10, seed=5)
        assert generate_run(spec, 1) == generate_run(spec, 1)

    def test_pre_attack_identical_to_baseline(self):
        for attack in ("BH", "DF", "WP", "LR"):
            spec = DomainSpec(attack=attack, runs=2, minutes_per_run=60,
                              attack_start_minute=59, seed=3)
            base = baseline_spec(spec)
            got = [r for r in generate_run(spec, 0) if r.minute < 59]
            ref = [r for r in generate_run(base, 0) if r.minute < 59]
            assert got == ref

    def test_counters_nonnegative_ranks_positive(self):
        for attack in ("BH", "DF", "WP", "LR"):
            spec = DomainSpec(attack=attack, runs=2, minutes_per_run=60,
                              attack_start_minute=10, seed=1)
            for r in generate_run(spec, 0):
                assert r.dis_sent >= 0 and r.dio_sent >= 0 and r.dao_sent >= 0
                assert r.dis_recv >= 0 and r.dio_recv >= 0
                assert r.rpl_total_sent == r.dis_sent + r.dio_sent + r.dao_sent
                assert r.rank > 0

    def test_df_attacker_dis_inflation(self):
        # attacker-minute mean > 5x its own baseline mean, K = 9
        spec = DomainSpec(attack="DF", runs=10, minutes_per_run=120,
                          attack_start_minute=10, seed=0)
        base = baseline_spec(spec)
        attack_total, base_total, n_minutes = 0.0, 0.0, 0
        for run_id in range(spec.runs):
            atk = generate_run(spec, run_id)
            ref = generate_run(base, run_id)
            # identify the attacker as the node whose dis output diverges most
            by_node_attack = {}
            by_node_base = {}
            for r in atk:
                if r.minute >= 10:
                    by_node_attack.setdefault(r.node_id, []).append(r.dis_sent)
            for r in ref:
                if r.minute >= 10:
                    by_node_base.setdefault(r.node_id, []).append(r.dis_sent)
            ratios = {node: np.mean(by_node_attack[node]) /
                      max(np.mean(by_node_base[node]), 1e-9)
                      for node in by_node_attack}
            attacker = max(ratios, key=ratios.get)
            attack_total += np.sum(by_node_attack[attacker])
            base_total += np.sum(by_node_base[attacker])
            n_minutes += len(by_node_attack[attacker])
        assert n_minutes >= 1000
        assert attack_total / max(base_total, 1e-9) > 5.0


class TestDomainGeneration:
    def test_record_counting(self, tmp_path):
        spec = DomainSpec(attack="BH", runs=20, minutes_per_run=120,
                          network_size=5, seed=0)
        path = generate_domain(spec, tmp_path / "bh.csv")
        assert len(parse_sink_log(path)) == 20 * 120 * 5

    def test_seed_changes_records_not_schema(self, tmp_path):
        a = DomainSpec(attack="WP", runs=2, minutes_per_run=30,
                       attack_start_minute=10, seed=0)
        b = DomainSpec(attack="WP", runs=2, minutes_per_run=30,
                       attack_start_minute=10, seed=1)
        ra = generate_domain_records(a)
        rb = generate_domain_records(b)
        assert ra != rb
        assert len(ra) == len(rb)

    def test_desk_suite_generates_quickly(self):
        start = time.perf_counter()
        for spec in desk_suite_specs(seed=0, runs=6):
            generate_domain_records(spec)
        assert time.perf_counter() - start < 10.0

    def test_invalid_spec_rejected(self):
        with pytest.raises(ConfigError):
            DomainSpec(attack="XX")
        with pytest.raises(ConfigError):
            DomainSpec(attack="BH", network_size=7)
        with pytest.raises(ConfigError):
            DomainSpec(attack="BH", attack_start_minute=120, minutes_per_run=120)


SIGNATURES = {"BH": MU_RANK, "DF": MU_DIS, "WP": MU_RANK, "LR": MU_DIO}


class TestAttackSignatures:
    @pytest.mark.parametrize("attack", ["BH", "DF", "WP", "LR"])
    def test_effect_size_and_stump(self, attack):
        # balanced 50/50 attack/normal minutes at lambda = 1
        spec = DomainSpec(attack=attack, variant="base", runs=10,
                          minutes_per_run=120, attack_start_minute=60, seed=2)
        feats, labels = minute_features(generate_domain_records(spec))
        assert labels.size >= 1000
        col = feats[:, SIGNATURES[attack]]
        attack_vals = col[labels == 1]
        normal_vals = col[labels == 0]
        spread = max(attack_vals.std(), normal_vals.std())
        effect = abs(attack_vals.mean() - normal_vals.mean()) / spread
        assert effect >= 1.0, f"{attack}: effect size {effect:.2f}"
        acc = stump_accuracy(col, labels)
        assert acc >= 0.8, f"{attack}: stump accuracy {acc:.3f}"


class TestFeatureDump:
    def test_row_counting_and_round_trip(self, tmp_path):
        specs = [DomainSpec(attack="DF", runs=3, minutes_per_run=40,
                            attack_start_minute=10, seed=0),
                 DomainSpec(attack="BH", runs=3, minutes_per_run=40,
                            attack_start_minute=10, seed=0)]
        domains = [build_domain_dataset(s, window=10) for s in specs]
        path = emit_feature_dump(domains, tmp_path / "dump.csv")
        rows = read_feature_dump(path)
        expected = sum(len(d.train) + len(d.test) for d in domains)
        assert len(rows) == expected
        assert {r["domain_id"] for r in rows} == {d.domain_id for d in domains}
        first = domains[0].train[0]
        match = [r for r in rows if r["domain_id"] == domains[0].domain_id
                 and (r["run_id"], r["end_minute"]) == first.source][0]
        assert np.max(np.abs(match["features"] -
                             first.features.ravel())) < 1e-8

    def test_empty_domain_list_header_only(self, tmp_path):
        path = emit_feature_dump([], tmp_path / "empty.csv")
        assert read_feature_dump(path) == []
        assert path.read_text().startswith("domain_id,run_id,end_minute,label,f001")
