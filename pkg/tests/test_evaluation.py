import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import MODEL_IDS, make_datasets, perfect_pipeline
from scenecount.backends.stubs import StubClassifier
from scenecount.classifier import ScenarioClassifier
from scenecount.domain import ScenarioLabel
from scenecount.evaluation import (
    AUTOMATIC_ROW,
    INTEGRATED_COLUMN,
    ConfusionMatrix,
    CountingMetrics,
    EvaluationError,
    counting_metrics,
    cross_evaluate,
    evaluate_classification,
    mae,
    render_classification_report,
    render_confusion_csv,
    render_cross_eval_csv,
    render_cross_eval_markdown,
    rmse,
)


def brute_force_ovr(counts, i):
    """Independent TP/FP/FN oracle walking every cell."""
    k = len(counts)
    tp = fp = fn = 0
    for gt in range(k):
        for pred in range(k):
            n = counts[gt][pred]
            if gt == i and pred == i:
                tp += n
            elif pred == i:
                fp += n
            elif gt == i:
                fn += n
    return tp, fp, fn


class TestCountingMetrics:
    def test_hand_computed_example(self):
        # |3-4|=1, |5-7|=2 -> mae 1.5; rmse sqrt((1+4)/2)
        assert mae([3, 5], [4, 7]) == 1.5
        assert rmse([3, 5], [4, 7]) == math.sqrt(2.5)

    def test_zero_error(self):
        assert mae([2, 9], [2, 9]) == 0.0
        assert rmse([2, 9], [2, 9]) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="differ"):
            mae([1], [1, 2])
        with pytest.raises(ValueError, match="differ"):
            rmse([1, 2], [1])

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="zero samples"):
            mae([], [])

    def test_counting_metrics_bundle(self):
        m = counting_metrics([3, 5], [4, 7])
        assert m == CountingMetrics(mae=1.5, rmse=math.sqrt(2.5), n=2)

    @settings(max_examples=200)
    @given(st.lists(st.tuples(st.integers(0, 10_000), st.integers(0, 10_000)),
                    min_size=1, max_size=50))
    def test_mae_never_exceeds_rmse(self, pairs):
        truth = [t for t, _ in pairs]
        pred = [p for _, p in pairs]
        assert mae(truth, pred) <= rmse(truth, pred) + 1e-12


class TestConfusionMatrix:
    def test_one_vs_rest_hand_example(self):
        counts = np.array([[5, 1, 0], [2, 6, 0], [0, 0, 4]])
        cm = ConfusionMatrix(k=3, counts=counts)
        assert cm.one_vs_rest(0) == (5, 2, 1)
        assert cm.precision(0) == pytest.approx(5 / 7)
        assert cm.recall(0) == pytest.approx(5 / 6)
        assert cm.support(0) == 6
        assert cm.total() == 18

    def test_matches_brute_force_on_random_matrices(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            counts = rng.integers(0, 40, size=(5, 5))
            cm = ConfusionMatrix(k=5, counts=counts)
            for i in range(5):
                assert cm.one_vs_rest(i) == brute_force_ovr(counts.tolist(), i)

    def test_accuracy_is_trace_over_total(self):
        rng = np.random.default_rng(9)
        counts = rng.integers(1, 30, size=(5, 5))
        cm = ConfusionMatrix(k=5, counts=counts)
        assert cm.accuracy() == pytest.approx(np.trace(counts) / counts.sum())

    def test_zero_denominators_yield_zero(self):
        cm = ConfusionMatrix(k=3)
        cm.add(0, 1, 4)  # class 2 never appears at all
        assert cm.precision(2) == 0.0
        assert cm.recall(2) == 0.0
        assert cm.f1(2) == 0.0
        assert cm.precision(0) == 0.0  # nothing predicted as 0
        assert cm.recall(1) == 0.0  # nothing truly 1

    def test_f1_is_harmonic_mean(self):
        counts = np.array([[8, 2], [4, 6]])
        cm = ConfusionMatrix(k=2, counts=counts)
        p, r = cm.precision(0), cm.recall(0)
        assert cm.f1(0) == pytest.approx(2 * p * r / (p + r))

    def test_from_pairs(self):
        cm = ConfusionMatrix.from_pairs([(0, 0), (0, 1), (1, 1)], k=2)
        np.testing.assert_array_equal(cm.counts, [[1, 1], [0, 1]])

    def test_add_validates(self):
        cm = ConfusionMatrix(k=3)
        with pytest.raises(ValueError, match="0..2"):
            cm.add(3, 0)
        with pytest.raises(ValueError, match="negative"):
            cm.add(0, 0, -1)

    def test_constructor_validates(self):
        with pytest.raises(ValueError, match="5x5"):
            ConfusionMatrix(k=5, counts=np.zeros((4, 4), dtype=np.int64))
        with pytest.raises(ValueError, match="non-negative integers"):
            ConfusionMatrix(k=2, counts=np.array([[0.5, 0], [0, 0]]))
        with pytest.raises(ValueError, match="at least 1"):
            ConfusionMatrix(k=0)

    def test_macro_average_is_unweighted_mean(self):
        counts = np.array([[10, 0], [5, 5]])
        cm = ConfusionMatrix(k=2, counts=counts)
        mp, mr, mf = cm.macro_average()
        assert mp == pytest.approx((cm.precision(0) + cm.precision(1)) / 2)
        assert mr == pytest.approx((cm.recall(0) + cm.recall(1)) / 2)
        assert mf == pytest.approx((cm.f1(0) + cm.f1(1)) / 2)

    def test_weighted_average_uses_support(self):
        counts = np.array([[30, 0], [5, 5]])
        cm = ConfusionMatrix(k=2, counts=counts)
        wp, wr, wf = cm.weighted_average()
        w0, w1 = 30 / 40, 10 / 40
        assert wp == pytest.approx(w0 * cm.precision(0) + w1 * cm.precision(1))
        assert wr == pytest.approx(w0 * cm.recall(0) + w1 * cm.recall(1))
        assert wf == pytest.approx(w0 * cm.f1(0) + w1 * cm.f1(1))

    def test_empty_averages(self):
        cm = ConfusionMatrix(k=2)
        assert cm.weighted_average() == (0.0, 0.0, 0.0)
        assert cm.accuracy() == 0.0


class TestEvaluateClassification:
    def test_perfect_classifier_is_diagonal(self):
        datasets = make_datasets(n=6)
        clf = ScenarioClassifier(StubClassifier(seed=0))
        cm = evaluate_classification(clf, datasets)
        assert cm.total() == 30
        assert np.trace(cm.counts) == 30
        for i in range(5):
            assert cm.support(i) == 6

    def test_confused_classifier_off_diagonal(self):
        datasets = make_datasets(n=40)
        confusion = np.eye(5)
        confusion[0] = [0.0, 1.0, 0.0, 0.0, 0.0]  # side-view always -> long-shot
        clf = ScenarioClassifier(StubClassifier(confusion=confusion, seed=1))
        cm = evaluate_classification(clf, datasets)
        assert cm.counts[0, 1] == 40
        assert cm.counts[0, 0] == 0

    def test_empty_mapping_rejected(self):
        clf = ScenarioClassifier(StubClassifier(seed=0))
        with pytest.raises(EvaluationError, match="no samples"):
            evaluate_classification(clf, {})


class TestCrossEvaluate:
    def test_grid_shape_and_perfect_scores(self):
        datasets = make_datasets(n=8)
        report = cross_evaluate(perfect_pipeline(), datasets)
        expected_rows = tuple(MODEL_IDS[l] for l in ScenarioLabel) + (AUTOMATIC_ROW,)
        assert report.rows == expected_rows
        assert report.columns == ("Side-View", "Long-Shot", "Top-View",
                                  "Protective-Suit", "Crowd", INTEGRATED_COLUMN)
        assert len(report.cells) == len(report.rows) * len(report.columns)
        # the perfect pipeline routes every frame to its oracle model
        for col in report.columns:
            auto = report.cell(AUTOMATIC_ROW, col)
            assert auto.mae == 0.0
            assert auto.rmse == 0.0
        # each fixed model is exact on its own scenario's dataset
        for label in ScenarioLabel:
            own = report.cell(MODEL_IDS[label], label.display_name)
            assert own.mae == 0.0

    def test_integrated_pools_all_samples(self):
        datasets = make_datasets(n=5)
        report = cross_evaluate(perfect_pipeline(), datasets)
        assert report.cell(AUTOMATIC_ROW, INTEGRATED_COLUMN).n == 25

    def test_missing_dataset_rejected(self):
        datasets = make_datasets(n=4)
        del datasets[ScenarioLabel.CROWD]
        with pytest.raises(EvaluationError, match="missing.*crowd"):
            cross_evaluate(perfect_pipeline(), datasets)

    def test_deterministic_across_runs(self):
        datasets = make_datasets(n=6)
        a = cross_evaluate(perfect_pipeline(), datasets)
        b = cross_evaluate(perfect_pipeline(), datasets)
        assert a.cells == b.cells


class TestRenderers:
    def make_cm(self):
        counts = np.array([
            [847, 120, 30, 100, 33],
            [60, 870, 40, 50, 41],
            [5, 4, 907, 6, 4],
            [250, 40, 30, 827, 34],
            [46, 66, 8, 15, 832],
        ])
        return ConfusionMatrix(k=5, counts=counts)

    def test_classification_report_layout(self):
        text = render_classification_report(self.make_cm())
        lines = text.splitlines()
        assert lines[0].split() == ["Scenario", "Precision", "Recall",
                                    "F1-score", "Support"]
        assert lines[1].startswith("Side-View")
        assert lines[6] == ""
        assert lines[7].startswith("Accuracy")
        assert lines[8].startswith("Macro Avg")
        assert lines[9].startswith("Weighted Avg")
        # spot-check one formatted value
        cm = self.make_cm()
        assert f"{cm.precision(2):.2f}" in lines[3]

    def test_classification_report_name_count_checked(self):
        with pytest.raises(ValueError, match="5 class names"):
            render_classification_report(self.make_cm(), names=["a", "b"])

    def test_confusion_csv_is_transposed(self):
        cm = self.make_cm()
        text = render_confusion_csv(cm)
        lines = text.splitlines()
        assert lines[0].startswith("pred\\gt,Side-View,")
        # row p, column g displays counts[g][p]
        first = lines[1].split(",")
        assert first[0] == "Side-View"
        assert first[1] == str(cm.counts[0, 0])
        assert first[2] == str(cm.counts[1, 0])

    def test_cross_eval_renderers(self):
        datasets = make_datasets(n=4)
        report = cross_evaluate(perfect_pipeline(), datasets)
        md = render_cross_eval_markdown(report)
        csv = render_cross_eval_csv(report)
        md_lines = md.splitlines()
        assert md_lines[0].startswith("| Model | Side-View MAE | Side-View RMSE |")
        assert set(md_lines[1].replace("|", "").split()) == {"---"}
        assert len(md_lines) == 2 + len(report.rows)
        csv_lines = csv.splitlines()
        assert csv_lines[0].split(",")[0] == "Model"
        assert len(csv_lines) == 1 + len(report.rows)
        assert csv_lines[-1].split(",")[0] == AUTOMATIC_ROW
        # 6 columns x 2 metrics + model id
        assert all(len(l.split(",")) == 13 for l in csv_lines)
