import io
from fractions import Fraction

import numpy as np
import pytest

from graphsac import (
    GraphSacConfig,
    IncompleteLabelsError,
    ParseError,
    ScoreVector,
    auc_report,
    baseline_scores,
    ingest_external_scores,
    make_injector,
    rank_auc,
    roc_curve,
    run_graphsac,
    sweep_grid,
)
from graphsac.evaluate import _run_cell, precision_at_k
from graphsac.sbm import generate_sbm


def pairwise_auc(values, mask):
    """Brute-force oracle: count positive-negative pairs, ties half."""
    pos = [v for v, m in zip(values, mask) if m]
    neg = [v for v, m in zip(values, mask) if not m]
    wins = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p in pos for q in neg)
    return wins / (len(pos) * len(neg))


def pairwise_auc_exact(values, mask):
    """Same oracle in exact rational arithmetic."""
    pos = [v for v, m in zip(values, mask) if m]
    neg = [v for v, m in zip(values, mask) if not m]
    twice_wins = sum(2 if p > q else 1 if p == q else 0 for p in pos for q in neg)
    return Fraction(twice_wins, 2 * len(pos) * len(neg))


class TestRankAuc:
    def test_perfect_separation(self):
        assert rank_auc(np.array([5.0, 6.0, 1.0, 2.0]), [1, 1, 0, 0]) == 1.0

    def test_all_ties_half(self):
        assert rank_auc(np.ones(6), [1, 0, 1, 0, 0, 1]) == 0.5

    def test_three_point_examples_match_pairwise_oracle(self):
        mask = [1, 0, 1]
        for values in ([3.0, 1.0, 2.0], [1.0, 3.0, 2.0]):
            expected = pairwise_auc(values, mask)
            assert rank_auc(np.array(values), mask) == expected
        assert rank_auc(np.array([3.0, 1.0, 2.0]), mask) == 1.0
        assert rank_auc(np.array([1.0, 3.0, 2.0]), mask) == 0.0

    def test_degenerate_mask_rejected(self):
        with pytest.raises(ValueError):
            rank_auc(np.array([1.0, 2.0]), [1, 1])

    def test_complement_identity_exact(self):
        # rank_auc is a single division of exactly-representable operands,
        # so each side must be the correctly rounded float of the exact
        # rational value; the complement identity is checked exactly there
        rng = np.random.default_rng(1)
        for _ in range(20):
            n = int(rng.integers(4, 40))
            values = rng.choice([0.0, 0.25, 0.5, 1.0, 2.0], size=n)
            mask = rng.random(n) < 0.4
            if mask.all() or not mask.any():
                continue
            exact = pairwise_auc_exact(values, mask)
            assert rank_auc(values, mask) == float(exact)
            assert rank_auc(-values, mask) == float(1 - exact)

    def test_monotone_transform_invariance_exact(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            n = int(rng.integers(4, 40))
            values = rng.normal(size=n).round(1)
            mask = rng.random(n) < 0.5
            if mask.all() or not mask.any():
                continue
            base = rank_auc(values, mask)
            assert rank_auc(np.exp(values), mask) == base
            assert rank_auc(3.0 * values + 7.0, mask) == base

    def test_matches_pairwise_oracle_50_cases(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = int(rng.integers(3, 200))
            values = rng.choice(np.linspace(0, 1, 7), size=n)
            mask = rng.random(n) < rng.uniform(0.1, 0.9)
            if mask.all() or not mask.any():
                continue
            assert rank_auc(values, mask) == pytest.approx(
                pairwise_auc(values, mask), abs=0.0
            )


class TestRocCurve:
    def test_endpoints_and_monotone(self):
        rng = np.random.default_rng(4)
        values = rng.choice([0.0, 0.5, 1.0, 2.0], size=30)
        mask = rng.random(30) < 0.4
        fpr, tpr = roc_curve(values, mask)
        assert fpr[0] == 0.0 and tpr[0] == 0.0
        assert fpr[-1] == 1.0 and tpr[-1] == 1.0
        assert np.all(np.diff(fpr) >= 0) and np.all(np.diff(tpr) >= 0)

    def test_trapezoid_equals_rank_auc(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            n = int(rng.integers(4, 80))
            values = rng.choice(np.linspace(-1, 1, 9), size=n)
            mask = rng.random(n) < 0.5
            if mask.all() or not mask.any():
                continue
            fpr, tpr = roc_curve(values, mask)
            assert abs(np.trapezoid(tpr, fpr) - rank_auc(values, mask)) <= 1e-9


class TestReports:
    def test_precision_at_k(self):
        scores = ScoreVector(
            values=np.array([9.0, 1.0, 8.0, 2.0]),
            mask=np.array([True, False, False, True]),
        )
        assert precision_at_k(scores, 2) == 0.5
        report = auc_report(scores)
        assert report.k == 2 and report.precision_at_k == 0.5

    def test_report_requires_mask(self):
        with pytest.raises(ValueError):
            auc_report(ScoreVector(values=np.ones(3)))


class TestExternalScores:
    def test_round_trip_equals_internal(self, tmp_path):
        graph, _ = generate_sbm([10, 10], p_in=0.6, p_out=0.05, seed=3)
        scores = baseline_scores(graph, "conductance")
        mask = np.zeros(20, dtype=bool)
        mask[[2, 11]] = True
        path = tmp_path / "external.tsv"
        path.write_text(
            "".join(f"{n}\t{float(v)!r}\n" for n, v in enumerate(scores.values))
        )
        report = ingest_external_scores(path, mask)
        assert report.auc == rank_auc(scores.values, mask)

    def test_reversed_scores_complement(self, tmp_path):
        values = np.array([0.3, 0.9, 0.1, 0.5])
        mask = np.array([True, False, False, True])
        path = tmp_path / "ext.tsv"
        path.write_text("".join(f"{n}\t{float(-v)!r}\n" for n, v in enumerate(values)))
        report = ingest_external_scores(path, mask)
        assert report.auc == float(1 - pairwise_auc_exact(values, mask))

    def test_partial_file_lists_missing(self):
        source = io.BytesIO(b"0\t1.0\n2\t2.0\n")
        with pytest.raises(IncompleteLabelsError, match="1"):
            ingest_external_scores(source, np.array([True, False, False]))

    def test_non_numeric_rejected(self):
        source = io.BytesIO(b"0\thigh\n1\t1.0\n")
        with pytest.raises(ParseError):
            ingest_external_scores(source, np.array([True, False]))


class TestSweepGrid:
    def setup_method(self):
        self.graph, self.labels = generate_sbm([40] * 4, p_in=0.2, p_out=0.01, seed=2)
        self.injector = make_injector("rw-labels", walk_length=8)
        self.config = GraphSacConfig(num_draws=10, threshold=0.3, master_seed=0)

    def test_single_cell_matches_direct_run(self):
        sweep = sweep_grid(
            self.graph, self.labels, self.injector, self.config,
            s_fractions=[0.05], k_fractions=[0.1], seeds=[7],
        )
        direct = _run_cell(
            self.graph, self.labels, self.injector, self.config, 0.05, 0.1, 7, 0, 0
        )
        assert sweep.auc[0, 0, 0] == direct[0]
        assert sweep.p_c[0, 0, 0] == direct[1]
        assert sweep.k_m[0, 0, 0] == direct[2]

    def test_zero_anomaly_column_conventions(self):
        sweep = sweep_grid(
            self.graph, self.labels, self.injector, self.config,
            s_fractions=[0.05], k_fractions=[0.0], seeds=[0],
        )
        assert np.isnan(sweep.auc[0, 0, 0])
        assert sweep.p_c[0, 0, 0] == 1.0
        assert sweep.k_m[0, 0, 0] == 0.0

    def test_deterministic_per_seed_and_cell(self):
        kwargs = dict(s_fractions=[0.05, 0.1], k_fractions=[0.05, 0.1], seeds=[1, 2])
        a = sweep_grid(self.graph, self.labels, self.injector, self.config, **kwargs)
        b = sweep_grid(self.graph, self.labels, self.injector, self.config, **kwargs)
        assert np.array_equal(a.auc, b.auc)
        assert np.array_equal(a.p_c, b.p_c)
        assert np.array_equal(a.k_m, b.k_m)

    def test_failing_cells_become_nan(self, caplog):
        # threshold 1.0 is unreachable once anomalies exist: cells fail softly
        config = GraphSacConfig(num_draws=4, threshold=1.0, master_seed=0)
        sweep = sweep_grid(
            self.graph, self.labels, self.injector, config,
            s_fractions=[0.05], k_fractions=[0.2], seeds=[0],
        )
        assert np.isnan(sweep.auc[0, 0, 0])

    def test_grid_shapes_and_stats(self):
        sweep = sweep_grid(
            self.graph, self.labels, self.injector, self.config,
            s_fractions=[0.05, 0.1, 0.2], k_fractions=[0.05, 0.1, 0.15],
            seeds=[0, 1],
        )
        assert sweep.auc.shape == (3, 3, 2)
        assert sweep.mean("auc").shape == (3, 3)
        assert np.all(sweep.mean("p_c")[np.isfinite(sweep.mean("p_c"))] >= 0.0)


class TestEndToEndAuc:
    def test_detector_beats_chance_on_planted_anomalies(self):
        # leaky enough that most planted labels truly change (10 of 12 here)
        graph, labels = generate_sbm([60, 60, 60], p_in=0.08, p_out=0.015, seed=9)
        injector = make_injector("rw-labels", walk_length=10)
        rng = np.random.default_rng(5)
        injected = injector(graph, labels, 12, rng)
        cfg = GraphSacConfig(sample_size=30, num_draws=25, threshold=0.4, master_seed=2)
        result = run_graphsac(injected.graph, injected.labels, cfg,
                              anomalies=injected.anomalies)
        assert rank_auc(result.scores.values, result.scores.mask) >= 0.85
