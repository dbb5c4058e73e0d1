import numpy as np
import pytest

from drift_ids.clmetrics import (
    DegenerateMetricWarning,
    PerfMatrix,
    TimingTable,
    auc_score,
    constraint_report,
    f1_score,
    perf_average,
    perf_update,
    plasticity,
    read_perf_matrix_csv,
    read_timings_csv,
    stability_bwt,
    training_efficiency,
    write_perf_matrix_csv,
    write_timings_csv,
)
from drift_ids.errors import ContractError, UndefinedMetricError


# ---------------------------------------------------------------------------
# Brute-force oracles
# ---------------------------------------------------------------------------


def pairwise_auc(scores, labels):
    """O(N^2) Mann-Whitney: count score_pos > score_neg, ties as 1/2."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                wins += 1.0
            elif sp == sn:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def brute_force_metrics(values, T):
    """Recompute the three Perf-matrix metrics from a dense array with plain loops."""
    avg = sum(values[T][j] for j in range(T)) / T
    gains = [values[j][j - 1] - values[j - 1][j - 1] for j in range(2, T + 1)]
    plast = sum(gains) / (T - 1)
    bwts = []
    for t in range(2, T + 1):
        bwts.append(sum(values[t][i - 1] - values[i][i - 1]
                        for i in range(1, t)) / (t - 1))
    stab = sum(bwts) / (T - 1)
    return avg, plast, stab, bwts


def filled_matrix(rng, T):
    values = np.full((T + 1, T), np.nan)
    m = PerfMatrix(T)
    for i in range(T + 1):
        for j in range(1, min(i + 1, T) + 1):
            v = float(rng.uniform(0, 1))
            m.set(i, j, v)
            values[i][j - 1] = v
    return m, values


class TestF1:
    def test_perfect_predictions(self):
        assert f1_score([1, 0, 1], [1, 0, 1]) == 1.0

    def test_no_predicted_positives_degenerate(self):
        with pytest.warns(DegenerateMetricWarning):
            assert f1_score([0, 0, 0], [1, 0, 1]) == 0.0

    def test_direct_formula(self):
        # TP=8, FP=2, FN=4 -> F1 = 8/11
        preds = [1] * 10 + [0] * 4
        labels = [1] * 8 + [0] * 2 + [1] * 4
        assert abs(f1_score(preds, labels) - 8.0 / 11.0) < 1e-15

    def test_length_mismatch(self):
        with pytest.raises(ContractError):
            f1_score([1, 0], [1])


class TestAuc:
    def test_perfect_separation(self):
        assert auc_score([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0]) == 1.0

    def test_all_ties(self):
        assert auc_score([0.5] * 6, [1, 0, 1, 0, 1, 0]) == 0.5

    def test_spec_example(self):
        assert auc_score([0.1, 0.4, 0.35, 0.8], [0, 1, 0, 1]) == 1.0
        assert auc_score([0.1, 0.2, 0.35, 0.8], [0, 1, 0, 1]) == 0.75

    def test_single_class_rejected(self):
        with pytest.raises(UndefinedMetricError):
            auc_score([0.1, 0.9], [1, 1])

    def test_matches_pairwise_oracle_on_random_instances(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n = int(rng.integers(2, 201))
            labels = rng.integers(0, 2, size=n)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            # quantized scores force plenty of ties
            scores = np.round(rng.uniform(0, 1, size=n), 2)
            assert auc_score(scores, labels) == pairwise_auc(scores, labels)


class TestPerfMatrix:
    def test_constant_matrix_average(self):
        m = PerfMatrix(3)
        for i in range(4):
            for j in range(1, min(i + 1, 3) + 1):
                m.set(i, j, 0.8)
        assert abs(perf_average(m) - 0.8) < 1e-15

    def test_bottom_row_average(self):
        m = PerfMatrix(2)
        for i, j, v in [(0, 1, 0.5), (1, 1, 0.9), (1, 2, 0.4),
                        (2, 1, 1.0), (2, 2, 0.5)]:
            m.set(i, j, v)
        assert abs(perf_average(m) - 0.75) < 1e-15

    def test_incomplete_bottom_row_rejected(self):
        m = PerfMatrix(2)
        m.set(2, 1, 0.5)
        with pytest.raises(ContractError):
            perf_average(m)

    def test_above_superdiagonal_rejected(self):
        m = PerfMatrix(4)
        with pytest.raises(ContractError):
            perf_update(m, 1, 3, 0.5)

    def test_out_of_range_value_rejected(self):
        m = PerfMatrix(2)
        with pytest.raises(ContractError):
            m.set(1, 1, 1.5)


class TestPlasticity:
    def test_no_gain(self):
        m = PerfMatrix(3)
        for i in range(4):
            for j in range(1, min(i + 1, 3) + 1):
                m.set(i, j, 0.6)
        assert plasticity(m) == 0.0

    def test_arithmetic(self):
        m = PerfMatrix(3)
        m.set(1, 2, 0.2)
        m.set(2, 2, 0.6)  # gain 0.4
        m.set(2, 3, 0.5)
        m.set(3, 3, 0.7)  # gain 0.2
        assert abs(plasticity(m) - 0.3) < 1e-15

    def test_missing_pre_exposure_entry(self):
        m = PerfMatrix(2)
        m.set(2, 2, 0.9)
        with pytest.raises(ContractError):
            plasticity(m)


class TestStability:
    def test_perfect_retention(self):
        m = PerfMatrix(4)
        for i in range(5):
            for j in range(1, min(i + 1, 4) + 1):
                m.set(i, j, 0.7)
        s_bar, bwts = stability_bwt(m)
        assert s_bar == 0.0
        assert all(b == 0.0 for b in bwts)

    def test_two_domain_drop(self):
        m = PerfMatrix(2)
        m.set(1, 1, 0.9)
        m.set(2, 1, 0.6)
        m.set(2, 2, 0.8)
        s_bar, bwts = stability_bwt(m)
        assert abs(s_bar + 0.3) < 1e-15
        assert len(bwts) == 1

    def test_single_domain_rejected(self):
        with pytest.raises(ContractError):
            stability_bwt(PerfMatrix(1))


class TestAgainstBruteForce:
    def test_random_matrices_match_recomputation(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            T = int(rng.integers(2, 9))
            m, values = filled_matrix(rng, T)
            avg, plast, stab, bwts = brute_force_metrics(values, T)
            assert abs(perf_average(m) - avg) < 1e-12
            assert abs(plasticity(m) - plast) < 1e-12
            s_bar, got_bwts = stability_bwt(m)
            assert abs(s_bar - stab) < 1e-12
            assert np.max(np.abs(np.array(got_bwts) - np.array(bwts))) < 1e-12


class TestTrainingEfficiency:
    def test_fastest_everywhere_is_one(self):
        t = TimingTable()
        t.add("fast", [1.0, 2.0, 3.0])
        t.add("slow", [2.0, 4.0, 6.0])
        te = training_efficiency(t)
        assert te["fast"] == 1.0
        assert abs(te["slow"] - 0.5) < 1e-12

    def test_geometric_mean(self):
        t = TimingTable()
        t.add("a", [1.0, 4.0])
        t.add("b", [1.0, 1.0])
        te = training_efficiency(t)
        assert abs(te["a"] - 0.5) < 1e-12  # ratios {1.0, 0.25}

    def test_bounds(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            t = TimingTable()
            T = int(rng.integers(1, 7))
            for k in range(int(rng.integers(2, 5))):
                t.add(f"m{k}", list(rng.uniform(0.1, 5.0, size=T)))
            for v in training_efficiency(t).values():
                assert 0.0 < v <= 1.0

    def test_matches_bruteforce_product(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            t = TimingTable()
            T = int(rng.integers(1, 6))
            rows = {f"m{k}": list(rng.uniform(0.1, 5.0, size=T)) for k in range(3)}
            for name, row in rows.items():
                t.add(name, row)
            te = training_efficiency(t)
            for name, row in rows.items():
                prod = 1.0
                for i in range(T):
                    prod *= min(r[i] for r in rows.values()) / row[i]
                assert abs(te[name] - prod ** (1.0 / T)) < 1e-12

    def test_zero_time_rejected(self):
        t = TimingTable()
        with pytest.raises(ValueError):
            t.add("a", [0.0, 1.0])


class TestConstraintReport:
    def test_empty_memory_within_any_budget(self):
        rep = constraint_report([("d1", 0), ("d2", 0)], [-0.05], budget=0,
                                epsilon=0.1)
        assert rep.ok and rep.max_memory_seen == 0

    def test_memory_violation_flagged(self):
        rep = constraint_report([("d1", 50), ("d2", 120)], [], budget=100,
                                epsilon=0.1)
        assert not rep.ok
        assert rep.violations[0]["kind"] == "memory"
        assert rep.violations[0]["step"] == "d2"

    def test_forgetting_violation_at_exact_steps(self):
        bwts = [-0.05, -0.02, -0.3, -0.08, -0.11]
        rep = constraint_report([], bwts, budget=10, epsilon=0.1)
        steps = [v["step"] for v in rep.violations]
        assert steps == [4, 6]  # t = index + 2

    def test_positive_bwt_never_violates(self):
        rep = constraint_report([], [0.5, 0.2], budget=10, epsilon=0.0)
        assert rep.ok


class TestIo:
    def test_perf_matrix_round_trip(self, tmp_path):
        cells = [(1, 1, 0.9123456789, 0.95), (2, 1, 0.5, 0.6), (2, 2, 1.0, 1.0)]
        path = tmp_path / "perf_matrix.csv"
        write_perf_matrix_csv(path, cells)
        assert read_perf_matrix_csv(path) == cells

    def test_timings_round_trip(self, tmp_path):
        rows = [("naive", 0, 0.123456), ("ewc", 0, 1.5)]
        path = tmp_path / "timings.csv"
        write_timings_csv(path, rows)
        assert read_timings_csv(path) == rows
