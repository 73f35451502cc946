"""AUC computation, SNR sweeps, ablation assembly, report serialization."""

import json
from dataclasses import dataclass

import numpy as np
import pytest

from uwbocc.augment import SnrReference
from uwbocc.baselines import energy_detector
from uwbocc.core import ActivityLabel, MeanRemovedMatrix
from uwbocc.errors import ConfigError, DataError
from uwbocc.evaluate import (
    ACTIVITY_SNR_ANCHORS,
    DEFAULT_EVAL_GRID,
    EvalReport,
    EvalRow,
    ablation,
    emit_report,
    mann_whitney_null_std,
    plot_series,
    read_report,
    roc_auc,
    snr_sweep,
)


def pairwise_auc(scores, labels):
    """O(n^2) counting oracle: wins + half credit for ties."""
    scores = np.asarray(scores, dtype=float)
    pos = scores[np.asarray(labels) == 1]
    neg = scores[np.asarray(labels) == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


class TestRocAuc:
    def test_perfect_separation(self):
        assert roc_auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0

    def test_perfectly_wrong(self):
        assert roc_auc([0.1, 0.2, 0.8, 0.9], [1, 1, 0, 0]) == 0.0

    def test_all_tied_is_half(self):
        assert roc_auc([0.5] * 6, [1, 0, 1, 0, 1, 0]) == 0.5

    def test_hand_worked_example(self):
        # pairs: (3,1) win, (3,2) win, (1,1) tie, (1,2) loss -> 2.5/4
        assert roc_auc([3.0, 1.0, 1.0, 2.0], [1, 1, 0, 0]) == pytest.approx(0.625)

    def test_matches_pairwise_oracle_with_ties(self):
        rng = np.random.default_rng(0)
        for trial in range(50):
            n = int(rng.integers(2, 60))
            # coarse quantization forces frequent ties
            scores = np.round(rng.standard_normal(n), 1)
            labels = np.zeros(n, dtype=int)
            n_pos = int(rng.integers(1, n))
            labels[rng.permutation(n)[:n_pos]] = 1
            assert roc_auc(scores, labels) == pytest.approx(
                pairwise_auc(scores, labels), abs=1e-12), f"trial {trial}"

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(1)
        scores = rng.standard_normal(80)
        labels = (rng.uniform(size=80) > 0.6).astype(int)
        base = roc_auc(scores, labels)
        assert roc_auc(np.exp(scores), labels) == pytest.approx(base, abs=1e-12)
        assert roc_auc(3 * scores - 7, labels) == pytest.approx(base, abs=1e-12)

    def test_single_class_rejected(self):
        with pytest.raises(DataError):
            roc_auc([0.1, 0.2], [1, 1])
        with pytest.raises(DataError):
            roc_auc([0.1, 0.2], [0, 0])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ConfigError):
            roc_auc([0.1, 0.2, 0.3], [1, 0])

    def test_non_finite_scores_rejected(self):
        with pytest.raises(DataError):
            roc_auc([0.1, np.nan], [1, 0])

    def test_null_distribution_width(self):
        rng = np.random.default_rng(2)
        n_pos, n_neg = 60, 140
        labels = np.concatenate([np.ones(n_pos), np.zeros(n_neg)])
        sigma = mann_whitney_null_std(n_pos, n_neg)
        aucs = [roc_auc(rng.standard_normal(n_pos + n_neg), labels) for _ in range(200)]
        assert abs(np.mean(aucs) - 0.5) < 4 * sigma / np.sqrt(200)
        assert np.std(aucs) == pytest.approx(sigma, rel=0.25)

    def test_null_std_formula(self):
        assert mann_whitney_null_std(1, 1) == pytest.approx(0.5)
        assert mann_whitney_null_std(100, 100) == pytest.approx(
            np.sqrt(201 / 120000), rel=1e-12)


class TestReportTypes:
    def test_row_validation(self):
        with pytest.raises(DataError):
            EvalRow("net", "breathing", -20.0, 1.2, 0, 10, 10)
        with pytest.raises(DataError):
            EvalRow("net", "breathing", -20.0, 0.9, 0, 0, 10)

    def test_config_hash_tracks_content(self):
        row = EvalRow("net", "breathing", -20.0, 0.9, 100, 10, 10)
        a = EvalReport((row,), 0, {"grid": [-20.0]})
        b = EvalReport((row,), 0, {"grid": [-20.0]})
        c = EvalReport((row,), 0, {"grid": [-25.0]})
        assert a.config_hash == b.config_hash
        assert a.config_hash != c.config_hash

    def test_merge_requires_same_seed(self):
        row = EvalRow("net", "breathing", -20.0, 0.9, 100, 10, 10)
        a = EvalReport((row,), 0, {})
        b = EvalReport((row,), 1, {})
        with pytest.raises(ConfigError):
            a.merged_with(b)
        merged = a.merged_with(EvalReport((row,), 0, {"extra": 1}))
        assert len(merged.rows) == 2
        assert merged.config == {"extra": 1}


@dataclass
class FakeSample:
    label: ActivityLabel
    residual: MeanRemovedMatrix


class SpikeScorer:
    """Scores concentration of energy in one slow-time column."""

    name = "spike"
    flops = 1234

    def __call__(self, batch):
        return [energy_detector(r, window_cols=1) for r in batch]


def sweep_samples(n_pos=6, n_neg=6, n=16, m=24):
    rng = np.random.default_rng(7)
    samples = []
    for _ in range(n_pos):
        data = np.zeros((n, m), dtype=complex)
        data[int(rng.integers(n)), int(rng.integers(m))] = 10.0  # one hot column
        samples.append(FakeSample(ActivityLabel.BREATHING,
                                  MeanRemovedMatrix(data, 0.5e-9, 0.1)))
    for _ in range(n_neg):
        data = np.zeros((n, m), dtype=complex)
        samples.append(FakeSample(ActivityLabel.EMPTY,
                                  MeanRemovedMatrix(data, 0.5e-9, 0.1)))
    return samples


class TestSnrSweep:
    def test_concentration_oracle_wins_at_mild_snr(self):
        report = snr_sweep(SpikeScorer(), sweep_samples(), SnrReference(100.0),
                           grid=[0.0], seed=0)
        assert len(report.rows) == 1
        row = report.rows[0]
        assert row.auc == 1.0
        assert row.activity == "breathing"
        assert row.n_pos == 6 and row.n_neg == 6
        assert row.name == "spike" and row.flops == 1234

    def test_auc_degrades_toward_chance_at_deep_snr(self):
        report = snr_sweep(SpikeScorer(), sweep_samples(), SnrReference(100.0),
                           grid=[0.0, -40.0], seed=0)
        by_snr = {row.snr_db: row.auc for row in report.rows}
        assert by_snr[0.0] > by_snr[-40.0]
        assert by_snr[-40.0] < 0.9

    def test_needs_negatives(self):
        samples = [s for s in sweep_samples() if s.label is not ActivityLabel.EMPTY]
        with pytest.raises(DataError, match="negative"):
            snr_sweep(SpikeScorer(), samples, SnrReference(100.0), grid=[0.0])

    def test_needs_positives(self):
        samples = [s for s in sweep_samples() if s.label is ActivityLabel.EMPTY]
        with pytest.raises(DataError, match="occupied"):
            snr_sweep(SpikeScorer(), samples, SnrReference(100.0), grid=[0.0])

    def test_synthetic_negatives_fill_in(self):
        samples = [s for s in sweep_samples() if s.label is not ActivityLabel.EMPTY]
        report = snr_sweep(SpikeScorer(), samples, SnrReference(100.0),
                           grid=[0.0], synthetic_negatives=8)
        assert report.rows[0].n_neg == 8
        assert report.config["synthetic_negatives"] == 8

    def test_empty_grid_rejected(self):
        with pytest.raises(ConfigError):
            snr_sweep(SpikeScorer(), sweep_samples(), SnrReference(100.0), grid=[])

    def test_deterministic_across_runs_and_threads(self):
        kwargs = dict(grid=[-5.0, -15.0], seed=3)
        ref = SnrReference(100.0)
        a = snr_sweep(SpikeScorer(), sweep_samples(), ref, threads=1, **kwargs)
        b = snr_sweep(SpikeScorer(), sweep_samples(), ref, threads=1, **kwargs)
        c = snr_sweep(SpikeScorer(), sweep_samples(), ref, threads=4, **kwargs)
        assert a.rows == b.rows == c.rows

    def test_seed_changes_results(self):
        ref = SnrReference(100.0)
        a = snr_sweep(SpikeScorer(), sweep_samples(), ref, grid=[-25.0], seed=0)
        b = snr_sweep(SpikeScorer(), sweep_samples(), ref, grid=[-25.0], seed=1)
        assert a.rows != b.rows

    def test_default_grid_shape(self):
        assert len(DEFAULT_EVAL_GRID) == 31
        assert DEFAULT_EVAL_GRID[0] == -10.0 and DEFAULT_EVAL_GRID[-1] == -40.0


def named_scorer(name, flops):
    scorer = SpikeScorer()
    scorer.name = name
    scorer.flops = flops
    return scorer


def three_activity_samples():
    rng = np.random.default_rng(8)
    samples = []
    for label in (ActivityLabel.BREATHING, ActivityLabel.TALKING, ActivityLabel.MOVING):
        for _ in range(3):
            data = np.zeros((12, 20), dtype=complex)
            data[int(rng.integers(12)), int(rng.integers(20))] = 5.0
            samples.append(FakeSample(label, MeanRemovedMatrix(data, 0.5e-9, 0.1)))
    for _ in range(3):
        samples.append(FakeSample(ActivityLabel.EMPTY,
                                  MeanRemovedMatrix(np.zeros((12, 20), dtype=complex),
                                                    0.5e-9, 0.1)))
    return samples


class TestAblation:
    def test_missing_variants_listed(self):
        scorers = {"1D-E": named_scorer("1D-E", 10)}
        with pytest.raises(DataError, match="1D-A.*2D-E"):
            ablation(scorers, three_activity_samples(), SnrReference(100.0))

    def test_full_grid_of_rows(self):
        from uwbocc.nn import VARIANTS

        scorers = {name: named_scorer(name, i + 1) for i, name in enumerate(VARIANTS)}
        report = ablation(scorers, three_activity_samples(), SnrReference(100.0), seed=0)
        assert len(report.rows) == 30  # ten detectors, three anchored activities
        assert {r.name for r in report.rows} == set(VARIANTS)
        for row in report.rows:
            anchor = ACTIVITY_SNR_ANCHORS[ActivityLabel(row.activity)]
            assert row.snr_db == anchor

    def test_partial_set_allowed_when_not_required(self):
        scorers = {"custom-a": named_scorer("custom-a", 10),
                   "custom-b": named_scorer("custom-b", 20)}
        report = ablation(scorers, three_activity_samples(), SnrReference(100.0),
                          require_all_variants=False)
        assert len(report.rows) == 6
        assert report.config["detectors"] == {"custom-a": 10, "custom-b": 20}

    def test_custom_anchor_subset(self):
        scorers = {"x": named_scorer("x", 10)}
        anchors = {ActivityLabel.BREATHING: -18.0}
        report = ablation(scorers, three_activity_samples(), SnrReference(100.0),
                          anchors=anchors, require_all_variants=False)
        assert len(report.rows) == 1
        assert report.rows[0].snr_db == -18.0


class TestReportIo:
    def make_report(self):
        rows = (
            EvalRow("net", "breathing", -10.0, 0.97, 2038000, 50, 50),
            EvalRow("net", "breathing", -20.0, 0.81, 2038000, 50, 50),
            EvalRow("energy", "breathing", -10.0, 0.66, 9000, 50, 50),
        )
        return EvalReport(rows, 7, {"kind": "snr_sweep", "grid": [-10.0, -20.0]})

    def test_csv_layout(self, tmp_path):
        path = tmp_path / "report.csv"
        emit_report(self.make_report(), "csv", path)
        lines = path.read_text().splitlines()
        assert lines[0] == "name,activity,snr_db,auc,flops,n_pos,n_neg,seed"
        assert lines[1] == "net,breathing,-10.0,0.97,2038000,50,50,7"
        assert len(lines) == 4

    def test_csv_bytes_stable(self, tmp_path):
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        emit_report(self.make_report(), "csv", p1)
        emit_report(self.make_report(), "csv", p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_json_round_trip(self, tmp_path):
        path = tmp_path / "report.json"
        report = self.make_report()
        emit_report(report, "json", path)
        loaded = read_report(path)
        assert loaded.rows == report.rows
        assert loaded.seed == report.seed
        assert loaded.config == report.config
        assert json.loads(path.read_text())["config_hash"] == report.config_hash

    def test_json_bytes_stable(self, tmp_path):
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        emit_report(self.make_report(), "json", p1)
        emit_report(self.make_report(), "json", p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_read_errors(self, tmp_path):
        with pytest.raises(DataError, match="cannot read"):
            read_report(tmp_path / "missing.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(DataError, match="not valid JSON"):
            read_report(bad)
        malformed = tmp_path / "malformed.json"
        malformed.write_text('{"rows": [{"name": "x"}], "seed": 0, "config": {}}')
        with pytest.raises(DataError, match="malformed"):
            read_report(malformed)

    def test_plot_series_sorted_by_x(self):
        series = plot_series(self.make_report())
        assert set(series) == {"net/breathing", "energy/breathing"}
        assert series["net/breathing"]["x"] == [-20.0, -10.0]
        assert series["net/breathing"]["y"] == [0.81, 0.97]

    def test_plot_series_flops_axis(self):
        series = plot_series(self.make_report(), x_field="flops")
        assert series["net/breathing"]["x"] == [2038000, 2038000]
        with pytest.raises(ConfigError):
            plot_series(self.make_report(), x_field="auc")
