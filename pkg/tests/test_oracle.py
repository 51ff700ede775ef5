import math

import numpy as np
import pytest

from graphsac import (
    DiffusionModel,
    EnumerationCapError,
    Graph,
    GraphsacError,
    LabelMatrix,
    TwoLevelFilter,
    enumerate_ensemble,
    exact_ensemble_means,
    predict_raw,
    verify_bias_identity,
    verify_concentration,
    verify_diffusion_identity,
    verify_verdict_identity,
)
from graphsac.oracle import subset_membership_counts
from graphsac.sbm import generate_sbm

from conftest import random_graph, random_labels


class TestEnsemble:
    @pytest.mark.parametrize("n,s,k", [(6, 2, 1), (8, 3, 2), (9, 2, 4), (7, 4, 3)])
    def test_cardinalities_match_binomials(self, n, s, k):
        ensemble = enumerate_ensemble(n, s, list(range(k)))
        assert ensemble.cardinalities_match()
        assert ensemble.total == len(ensemble.clean) + len(ensemble.contaminated)

    def test_partition_exact(self):
        ensemble = enumerate_ensemble(6, 3, [0, 4])
        for subset in ensemble.clean:
            assert not {0, 4} & set(subset)
        for subset in ensemble.contaminated:
            assert {0, 4} & set(subset)

    def test_cap_enforced(self):
        with pytest.raises(EnumerationCapError):
            enumerate_ensemble(40, 20, [0], cap=1000)

    def test_clean_frequency_counting(self):
        # every nominal node appears in exactly C(N-K-1, S-1) clean subsets
        ensemble = enumerate_ensemble(9, 3, [2, 5])
        clean_counts, contam_counts = subset_membership_counts(ensemble)
        expected = math.comb(9 - 2 - 1, 3 - 1)
        for v in range(9):
            if v in (2, 5):
                assert clean_counts[v] == 0
                assert contam_counts[v] == math.comb(8, 2)
            else:
                assert clean_counts[v] == expected


class TestTwoLevelFilter:
    def test_law_of_total_probability(self):
        ensemble = enumerate_ensemble(8, 2, [0, 1])
        for f in (0.0, 0.005, 1.0 / ensemble.total):
            fm = TwoLevelFilter(f)
            total = len(ensemble.clean) * fm.clean_prob(ensemble) + len(
                ensemble.contaminated
            ) * f
            assert abs(total - 1.0) <= 1e-15

    def test_false_alarm_satisfies_mass_balance(self):
        # the false-alarm probability is defined by equating the total
        # sampling mass of contaminated subsets, |c| * f, with
        # p_fa * |c| * p(L in c) under uniform subset choice
        ensemble = enumerate_ensemble(8, 2, [0, 1])
        f = 0.004
        fm = TwoLevelFilter(f)
        c = len(ensemble.contaminated)
        p_contaminated = c / ensemble.total
        assert abs(c * f - fm.false_alarm_prob(ensemble) * c * p_contaminated) <= 1e-15

    def test_uniform_filter_probabilities(self):
        ensemble = enumerate_ensemble(7, 2, [3])
        fm = TwoLevelFilter.uniform(ensemble)
        assert fm.clean_prob(ensemble) == pytest.approx(1.0 / ensemble.total)


class TestEnsembleMeans:
    def test_zero_anomalies_filtered_equals_nominal(self):
        g = random_graph(np.random.default_rng(0), 7)
        y = random_labels(np.random.default_rng(1), 7, 2)
        ensemble = enumerate_ensemble(7, 2, [])
        model = DiffusionModel("ppr", order=2)
        for f_prob in (0.0, 0.3):
            fm = TwoLevelFilter(f_prob)  # no contaminated subsets: f unused
            means = exact_ensemble_means(g, y, ensemble, model, filter_model=fm)
            assert means.anomalous is None
            assert np.max(np.abs(means.filtered - means.nominal)) <= 1e-12

    def test_perfect_filter_recovers_nominal(self):
        g = random_graph(np.random.default_rng(2), 8)
        y = random_labels(np.random.default_rng(3), 8, 3)
        ensemble = enumerate_ensemble(8, 2, [1, 5])
        means = exact_ensemble_means(
            g, y, ensemble, DiffusionModel("ppr", order=2), TwoLevelFilter(0.0)
        )
        assert np.max(np.abs(means.filtered - means.nominal)) <= 1e-12

    def test_uniform_filter_equals_unfiltered_mean(self):
        g = Graph.from_edges([(i, i + 1, 1.0) for i in range(7)])
        y = random_labels(np.random.default_rng(4), 8, 2)
        ensemble = enumerate_ensemble(8, 2, [0, 3])
        model = DiffusionModel("ppr", order=3)
        means = exact_ensemble_means(
            g, y, ensemble, model, TwoLevelFilter.uniform(ensemble)
        )
        everything = [
            predict_raw(model, g, y, s)
            for s in list(ensemble.clean) + list(ensemble.contaminated)
        ]
        assert np.max(np.abs(means.filtered - np.mean(everything, axis=0))) <= 1e-12


class TestBiasIdentity:
    def test_zero_false_alarm_both_sides_zero(self):
        g = random_graph(np.random.default_rng(5), 8)
        y = random_labels(np.random.default_rng(6), 8, 2)
        ensemble = enumerate_ensemble(8, 2, [2])
        fm = TwoLevelFilter(0.0)
        means = exact_ensemble_means(g, y, ensemble, DiffusionModel("ppr", order=2), fm)
        report = verify_bias_identity(ensemble, fm, means)
        assert report.lhs <= 1e-12 and report.rhs == 0.0 and report.passed

    def test_identity_and_convex_combination_on_random_fixtures(self):
        rng = np.random.default_rng(7)
        for trial in range(12):
            n = int(rng.integers(6, 13))
            s = int(rng.integers(1, 4))
            k = int(rng.integers(1, 4))
            g = random_graph(rng, n, edge_prob=0.4)
            y = random_labels(rng, n, int(rng.integers(2, 4)))
            anomalies = rng.choice(n, size=k, replace=False)
            ensemble = enumerate_ensemble(n, s, anomalies)
            choice = trial % 3
            if choice == 0:
                fm = TwoLevelFilter(0.0)
            elif choice == 1:
                fm = TwoLevelFilter(0.1 / len(ensemble.contaminated))
            else:
                fm = TwoLevelFilter.uniform(ensemble)
            model = DiffusionModel("ppr", order=int(rng.integers(1, 4)))
            means = exact_ensemble_means(g, y, ensemble, model, fm)
            report = verify_bias_identity(ensemble, fm, means)
            assert report.gap <= 1e-10
            assert report.details["convex_gap"] <= 1e-12


class TestDiffusionIdentity:
    def test_rejects_zero_anomalies(self):
        g = random_graph(np.random.default_rng(8), 6)
        y = random_labels(np.random.default_rng(9), 6, 2)
        with pytest.raises(GraphsacError):
            verify_diffusion_identity(
                g, y, enumerate_ensemble(6, 2, []), DiffusionModel("ppr", order=2)
            )

    def test_rejects_multilabel(self):
        g = random_graph(np.random.default_rng(10), 5)
        y = LabelMatrix(num_classes=2, rows=((0, 1), (0,), (1,), (0,), (1,)))
        with pytest.raises(GraphsacError):
            verify_diffusion_identity(
                g, y, enumerate_ensemble(5, 2, [1]), DiffusionModel("ppr", order=1)
            )

    def test_anomalous_frequency_is_binomial(self):
        g = Graph.from_edges([(i, i + 1, 1.0) for i in range(5)])
        y = random_labels(np.random.default_rng(11), 6, 2)
        ensemble = enumerate_ensemble(6, 2, [3])
        report = verify_diffusion_identity(g, y, ensemble, DiffusionModel("ppr", order=2))
        assert report.details["anomalous_frequency"] == math.comb(5, 1)
        assert report.details["counting_ok"]
        assert report.gap <= 1e-10

    def test_identity_on_path_with_lower_bound(self):
        g = Graph.from_edges([(i, i + 1, 1.0) for i in range(5)])
        y = LabelMatrix.from_array([0, 0, 1, 1, 0, 1])
        ensemble = enumerate_ensemble(6, 2, [1])
        report = verify_diffusion_identity(g, y, ensemble, DiffusionModel("ppr", order=2))
        assert report.passed
        assert report.details["lower_bound_holds"]
        assert report.details["column_norm_lower_bound"] <= report.lhs + 1e-12


class TestConcentration:
    def test_single_draw_bounded_by_hard_cap(self):
        g = random_graph(np.random.default_rng(12), 8)
        y = random_labels(np.random.default_rng(13), 8, 2)
        ensemble = enumerate_ensemble(8, 2, [0])
        reports = verify_concentration(
            g, y, ensemble, DiffusionModel("ppr", order=2),
            draw_counts=(1,), trials=50, seed=5,
        )
        mean_report = reports[0]
        assert mean_report.details["max_deviation"] <= 2.0 * math.sqrt(8)

    def test_mean_bound_and_slope(self):
        g = random_graph(np.random.default_rng(14), 8, edge_prob=0.4)
        y = random_labels(np.random.default_rng(15), 8, 2)
        ensemble = enumerate_ensemble(8, 2, [1, 4])
        reports = verify_concentration(
            g, y, ensemble, DiffusionModel("ppr", order=3),
            draw_counts=(1, 5, 25, 125), trials=80, seed=6,
        )
        for report in reports[:-1]:
            assert report.passed, report.name
            assert report.details["tails_ok"]
        slope = reports[-1]
        assert -0.65 <= slope.lhs <= -0.35

    def test_biased_law_also_concentrates(self):
        g = random_graph(np.random.default_rng(16), 8, edge_prob=0.4)
        y = random_labels(np.random.default_rng(17), 8, 2)
        ensemble = enumerate_ensemble(8, 2, [2])
        fm = TwoLevelFilter(0.2 / len(ensemble.contaminated))
        reports = verify_concentration(
            g, y, ensemble, DiffusionModel("ppr", order=2), filter_model=fm,
            draw_counts=(5, 25), trials=60, seed=7,
        )
        assert all(r.passed for r in reports[:-1])


class TestVerdictIdentity:
    def star_fixture(self):
        # star center flipped to class 1: with single-node draws the filter
        # separates perfectly (clean ratio 0.75 vs contaminated 0.25)
        g = Graph.from_edges([(0, i, 1.0) for i in range(1, 4)])
        y = LabelMatrix.from_array([1, 0, 0, 0], num_classes=2)
        return g, y

    def test_perfect_filter_degenerates_to_zero(self):
        g, y = self.star_fixture()
        ensemble = enumerate_ensemble(4, 1, [0])
        report = verify_verdict_identity(
            g, y, ensemble, DiffusionModel("ppr", order=2), threshold=0.5
        )
        assert not report.details["skipped"]
        assert report.details["smallest_valid_km"] == 0
        assert report.details["degenerate"]
        assert report.lhs == 0.0 and report.rhs == 0.0 and report.passed

    def test_accept_everything_reports_violation(self):
        g, y = self.star_fixture()
        ensemble = enumerate_ensemble(4, 1, [0])
        report = verify_verdict_identity(
            g, y, ensemble, DiffusionModel("ppr", order=2), threshold=0.0
        )
        assert report.details["skipped"]
        assert report.details["assumption2_violation_count"] >= 1
        assert not report.passed

    def test_identity_exact_when_cap_covers_all_contamination(self):
        graph, labels = generate_sbm([6, 4], p_in=0.85, p_out=0.08, seed=0)
        corrupted = labels.replace_rows({7: (0,), 9: (0,)})
        ensemble = enumerate_ensemble(10, 3, (7, 9))
        report = verify_verdict_identity(
            graph, corrupted, ensemble, DiffusionModel("ppr", order=5),
            threshold=0.6, km_candidate=2,
        )
        assert not report.details["skipped"]
        assert report.details["smallest_valid_km"] == 2
        assert report.gap <= 1e-10
        assert report.details["exact_variant_gap"] <= 1e-10
        assert report.lhs > 0.01  # nontrivial: both sides well away from zero

    def test_intermediate_cap_keeps_exact_variant(self):
        # with a nonvacuous contamination cap the closed form as displayed
        # carries a structural gap, but the conflation-free variant stays
        # exact; this documents the distinction
        graph, labels = generate_sbm([8, 2], p_in=0.85, p_out=0.08, seed=0)
        corrupted = labels.replace_rows({0: (1,), 1: (1,)})
        ensemble = enumerate_ensemble(10, 3, (0, 1))
        report = verify_verdict_identity(
            graph, corrupted, ensemble, DiffusionModel("ppr", order=5),
            threshold=0.6, km_candidate=1,
        )
        assert not report.details["skipped"]
        assert report.details["smallest_valid_km"] == 1
        assert report.details["exact_variant_gap"] <= 1e-10
        assert report.gap > 1e-3

    def test_assumption1_violations_reported(self):
        graph, labels = generate_sbm([6, 4], p_in=0.85, p_out=0.08, seed=5)
        corrupted = labels.replace_rows({7: (0,), 9: (0,)})
        ensemble = enumerate_ensemble(10, 3, (7, 9))
        report = verify_verdict_identity(
            graph, corrupted, ensemble, DiffusionModel("ppr", order=5),
            threshold=0.95,
        )
        assert report.details["skipped"]
        assert report.details["assumption1_violation_count"] >= 1
