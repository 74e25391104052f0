import numpy as np
import pytest

from lazynn.core import stratified_folds
from lazynn.index import NeighbourList
from lazynn.learner import (
    EvalReport,
    VotingScheme,
    classify,
    evaluate_cv,
    regress,
    worker_cap,
)
from lazynn.metrics import MetricConfig
from lazynn.synth import make_dataset


def neighbours(pairs):
    idx = np.array([i for i, _ in pairs])
    dist = np.array([d for _, d in pairs])
    return NeighbourList(idx, dist)


class TestClassify:
    def test_unanimous_neighbours(self):
        # three nearest all share one class
        labels = np.array([0, 0, 0, 1])
        nb = neighbours([(0, 0.5), (1, 0.7), (2, 0.9)])
        assert classify(nb, labels).label == 0

    def test_majority_two_against_one(self):
        labels = np.array([1, 1, 0])
        nb = neighbours([(2, 0.2), (0, 0.5), (1, 0.7)])
        assert classify(nb, labels).label == 1

    def test_inverse_distance_overturns_majority(self):
        # one vote at d=1 beats two votes at d=2 and d=4: 1.0 > 0.5 + 0.25
        labels = np.array([0, 1, 1])
        nb = neighbours([(0, 1.0), (1, 2.0), (2, 4.0)])
        pred = classify(nb, labels, VotingScheme("inverse_distance", p=1.0))
        assert pred.votes[0] == pytest.approx(1.0)
        assert pred.votes[1] == pytest.approx(0.75)
        assert pred.label == 0

    def test_zero_distance_neighbour_stays_finite(self):
        labels = np.array([0, 1])
        nb = neighbours([(0, 0.0), (1, 0.5)])
        pred = classify(nb, labels, VotingScheme("inverse_distance"))
        assert np.isfinite(pred.votes).all()
        assert pred.label == 0

    def test_exponential_votes_bounded_by_one_each(self):
        labels = np.array([0, 0, 0])
        nb = neighbours([(0, 0.1), (1, 1.0), (2, 3.0)])
        pred = classify(nb, labels, VotingScheme("exponential"))
        assert pred.votes[0] <= 3.0
        assert pred.label == 0

    def test_tie_breaks_to_lowest_class_id(self):
        labels = np.array([1, 0])
        nb = neighbours([(0, 0.5), (1, 0.5)])
        assert classify(nb, labels).label == 0

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            classify(NeighbourList(np.array([], dtype=int), np.array([])), np.array([0]))

    def test_distance_scaling_never_changes_majority(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            labels = rng.integers(0, 3, size=10)
            dists = np.sort(rng.random(5))
            idx = rng.choice(10, size=5, replace=False)
            nb1 = NeighbourList(idx, dists)
            nb2 = NeighbourList(idx, dists * 7.5)
            assert classify(nb1, labels).label == classify(nb2, labels).label

    def test_distance_scaling_never_changes_inverse_argmax(self):
        rng = np.random.default_rng(2)
        scheme = VotingScheme("inverse_distance", p=2.0)
        for _ in range(50):
            labels = rng.integers(0, 3, size=10)
            dists = np.sort(rng.random(5)) + 0.05
            idx = rng.choice(10, size=5, replace=False)
            a = classify(NeighbourList(idx, dists), labels, scheme)
            b = classify(NeighbourList(idx, dists * 3.0), labels, scheme)
            assert a.label == b.label
            assert np.allclose(b.votes * 9.0, a.votes)

    def test_votes_permutation_invariant(self):
        labels = np.array([0, 1, 0, 1])
        pairs = [(0, 0.3), (1, 0.5), (2, 0.7), (3, 0.9)]
        fwd = classify(neighbours(pairs), labels, VotingScheme("exponential"))
        rev = classify(neighbours(pairs[::-1][::-1]), labels, VotingScheme("exponential"))
        assert np.allclose(fwd.votes, rev.votes)

    def test_scheme_validation(self):
        with pytest.raises(ValueError, match="unknown voting"):
            VotingScheme("plurality")
        with pytest.raises(ValueError, match=">= 1"):
            VotingScheme("inverse_distance", p=0.2)


class TestRegress:
    def test_equal_distances_average(self):
        nb = neighbours([(0, 1.0), (1, 1.0)])
        assert regress(nb, [2.0, 4.0]) == pytest.approx(3.0)

    def test_single_neighbour(self):
        nb = neighbours([(1, 0.4)])
        assert regress(nb, [9.0, 7.0]) == pytest.approx(7.0)

    def test_inverse_weighted_mean(self):
        nb = neighbours([(0, 1.0), (1, 2.0)])
        got = regress(nb, [2.0, 4.0], weighting="inverse", p=1.0)
        assert got == pytest.approx((2.0 * 1.0 + 4.0 * 0.5) / 1.5)

    def test_literal_mode_divides_by_k(self):
        nb = neighbours([(0, 1.0), (1, 2.0)])
        got = regress(nb, [2.0, 4.0], weighting="inverse", p=1.0, literal=True)
        assert got == pytest.approx((2.0 + 2.0) / 2.0)

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            regress(NeighbourList(np.array([], dtype=int), np.array([])), [1.0])


class TestEvaluateCv:
    def test_separated_blobs_score_high(self, blob_dataset):
        folds = stratified_folds(blob_dataset, 5, seed=3)
        report = evaluate_cv(blob_dataset, folds, k=3)
        assert report.mean_accuracy >= 0.95

    def test_deterministic_for_fixed_seed(self, blob_dataset):
        folds = stratified_folds(blob_dataset, 3, seed=4)
        a = evaluate_cv(blob_dataset, folds, k=3)
        b = evaluate_cv(blob_dataset, folds, k=3)
        assert a.fold_accuracies == b.fold_accuracies
        assert a.config == b.config

    def test_k_equal_to_train_size_predicts_global_majority(self):
        x = np.array([[0.0], [0.1], [0.2], [10.0], [10.1], [0.3]])
        y = np.array([0, 0, 0, 1, 1, 0])
        data = make_dataset(x, y)
        folds = stratified_folds(data, 2, seed=0)
        report = evaluate_cv(data, folds, k=data.n)  # clamps to train size
        majority_rate = []
        for f in range(2):
            train_labels = y[folds.train_indices(f)]
            majority = np.bincount(train_labels).argmax()
            test_labels = y[folds.test_indices(f)]
            majority_rate.append(np.mean(test_labels == majority))
        assert report.fold_accuracies == pytest.approx(tuple(majority_rate))

    @pytest.mark.parametrize("kind", ["kd", "ball", "rpforest"])
    def test_all_index_kinds_agree_on_easy_data(self, blob_dataset, kind):
        folds = stratified_folds(blob_dataset, 2, seed=5)
        brute = evaluate_cv(blob_dataset, folds, index_kind="brute", k=3)
        other = evaluate_cv(blob_dataset, folds, index_kind=kind, k=3,
                            search_budget=blob_dataset.n)
        assert other.fold_accuracies == pytest.approx(brute.fold_accuracies)

    def test_report_shape_and_json(self, blob_dataset):
        folds = stratified_folds(blob_dataset, 4, seed=6)
        report = evaluate_cv(blob_dataset, folds, k=1)
        assert len(report.fold_accuracies) == 4
        assert len(report.build_times) == 4
        d = report.to_dict()
        assert set(d) == {"fold_accuracies", "mean_accuracy", "build_times",
                          "query_times", "config"}

    def test_fold_errors_carry_context(self, blob_dataset):
        folds = stratified_folds(blob_dataset, 2, seed=7)
        with pytest.raises(RuntimeError, match="fold 0"):
            evaluate_cv(blob_dataset, folds, MetricConfig("pearson"), "kd", 3)

    def test_thread_cap_parses_env(self, monkeypatch):
        monkeypatch.setenv("LAZYNN_THREADS", "4")
        assert worker_cap() == 4
        monkeypatch.setenv("LAZYNN_THREADS", "junk")
        assert worker_cap() == 1

    def test_threaded_run_matches_sequential(self, blob_dataset, monkeypatch):
        folds = stratified_folds(blob_dataset, 4, seed=8)
        seq = evaluate_cv(blob_dataset, folds, k=3)
        monkeypatch.setenv("LAZYNN_THREADS", "4")
        par = evaluate_cv(blob_dataset, folds, k=3)
        assert par.fold_accuracies == seq.fold_accuracies

    def test_heterogeneous_metric_uses_mixed_scan(self):
        from lazynn.core import Dataset, FeatureSchema

        schema = FeatureSchema((("v", "numeric"), ("c", "categorical")), "y")
        rng = np.random.default_rng(9)
        n = 40
        codes = rng.integers(0, 2, size=n).astype(np.int32)
        labels = codes.astype(np.int64)  # class equals the categorical value
        data = Dataset(schema, rng.random((n, 1)), codes[:, None],
                       (("a", "b"),), labels, ("c0", "c1"))
        folds = stratified_folds(data, 2, seed=0)
        metric = MetricConfig("heterogeneous", schema=schema)
        report = evaluate_cv(data, folds, metric, "brute", 1)
        assert report.mean_accuracy == 1.0

    def test_eval_report_validation(self):
        with pytest.raises(ValueError, match="\\[0, 1\\]"):
            EvalReport((1.5,), 1.5, (0.1,), (0.1,), {})
