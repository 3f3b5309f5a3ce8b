import numpy as np
import pytest

from core.errors import DatasetIntegrityError
from core.services.classifiers import ErtHyperparams, MlpHyperparams, ert_train, mlp_train
from core.services.classifiers.base import Classifier
from core.services.dataset import Dataset, DatasetMode, NegativeStrategy, extract_dataset
from core.services.metrics import (
    EvalReport,
    confusion_matrix,
    evaluate,
    format_report,
    latency_benchmark,
)
from core.services.simulation import SimConfig, generate_events
from core.tests.conftest import eval_dataset


class ScoreModel(Classifier):
    """Echoes the first feature back as p_valid."""

    KIND = "score"

    def __init__(self):
        super().__init__(hyperparams=None)

    def _predict_proba(self, X: np.ndarray) -> np.ndarray:
        return np.column_stack([1.0 - X[:, 0], X[:, 0]])


class TestConfusionMatrix:
    def test_perfect_predictions(self):
        truth = [0, 1, 1, 0, 1]

        assert confusion_matrix(truth, truth) == [[2, 0], [0, 3]]

    def test_all_false_positives(self):
        assert confusion_matrix([1] * 4, [0] * 4) == [[0, 4], [0, 0]]

    def test_hand_counted_rows(self):
        truth = [0, 0, 0, 1, 1, 1]
        predictions = [0, 0, 1, 0, 0, 1]

        assert confusion_matrix(predictions, truth) == [[2, 1], [2, 1]]

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="lengths differ"):
            confusion_matrix([0, 1], [0, 1, 1])


class TestEvaluate:
    def test_perfect_classifier(self):
        dataset, _ = eval_dataset([[(0.9, 1), (0.1, 0), (0.2, 0)], [(0.1, 0), (0.8, 1)]])

        report = evaluate(ScoreModel(), dataset)

        assert (report.a1, report.ac, report.ah, report.af) == (1.0, 0.0, 1.0, 0.0)
        assert report.accuracy == 1.0
        assert report.n_samples == 2
        assert report.n_rows == 5

    def test_two_hand_enumerated_samples(self):
        # first: valid found plus a lower-scored false positive; second: valid missed
        dataset, _ = eval_dataset([[(0.9, 1), (0.7, 0)], [(0.2, 1), (0.1, 0)]])

        report = evaluate(ScoreModel(), dataset)

        assert (report.a1, report.af) == (0.5, 0.5)
        assert (report.ac, report.ah) == (1.0, 1.0)
        assert report.false_positives == 1
        assert report.false_negatives == 1

    def test_probability_tie_is_not_top_ranked(self):
        dataset, _ = eval_dataset([[(0.8, 1), (0.8, 0)], [(0.9, 1), (0.3, 0)]])

        report = evaluate(ScoreModel(), dataset)

        assert report.a1 == 1.0
        assert report.ah == 0.5

    def test_lone_valid_row_is_top_ranked(self):
        dataset, _ = eval_dataset([[(0.6, 1)]])

        assert evaluate(ScoreModel(), dataset).ah == 1.0

    def test_nothing_detected(self):
        dataset, _ = eval_dataset([[(0.1, 1), (0.9, 0)]])

        report = evaluate(ScoreModel(), dataset)

        assert (report.a1, report.af, report.ac, report.ah) == (0.0, 1.0, 0.0, 0.0)

    def test_accuracy_matches_confusion(self):
        rng = np.random.default_rng(0)
        groups = [
            [(float(rng.random()), 1)] + [(float(rng.random()), 0) for _ in range(rng.integers(0, 6))]
            for _ in range(40)
        ]
        dataset, _ = eval_dataset(groups)

        report = evaluate(ScoreModel(), dataset)

        (tn, _), (_, tp) = report.confusion
        assert report.accuracy == pytest.approx((tn + tp) / report.n_rows)
        assert report.a1 + report.af == 1.0
        assert 0.0 <= report.ac <= 1.0 and 0.0 <= report.ah <= 1.0

    def test_raising_threshold_never_adds_positives(self):
        rng = np.random.default_rng(1)
        groups = [
            [(float(rng.random()), 1)] + [(float(rng.random()), 0) for _ in range(4)]
            for _ in range(50)
        ]
        dataset, _ = eval_dataset(groups)

        reports = [evaluate(ScoreModel(), dataset, t) for t in np.linspace(0.0, 1.0, 11)]

        predicted_valid = [r.confusion[0][1] + r.confusion[1][1] for r in reports]
        assert predicted_valid == sorted(predicted_valid, reverse=True)

    def test_top_ranking_ignores_threshold_while_all_detected(self):
        rng = np.random.default_rng(2)
        groups = [
            [(float(rng.uniform(0.5, 1.0)), 1)] + [(float(rng.random()), 0) for _ in range(3)]
            for _ in range(30)
        ]
        dataset, _ = eval_dataset(groups)

        values = {evaluate(ScoreModel(), dataset, t).ah for t in (0.0, 0.2, 0.4, 0.5)}

        assert len(values) == 1

    def test_sample_without_valid_row(self):
        dataset, _ = eval_dataset([[(0.9, 1)], [(0.5, 0), (0.4, 0)]])

        with pytest.raises(DatasetIntegrityError, match="event 1"):
            evaluate(ScoreModel(), dataset)

    def test_training_pairs_with_two_tracks_rejected(self):
        dataset, _ = eval_dataset([[(0.9, 1), (0.8, 1), (0.1, 0), (0.2, 0)]])

        with pytest.raises(DatasetIntegrityError):
            evaluate(ScoreModel(), dataset)

    def test_empty_dataset(self):
        with pytest.raises(DatasetIntegrityError):
            evaluate(ScoreModel(), Dataset.empty())


class TestEvalReport:
    def test_rejects_broken_identities(self):
        with pytest.raises(ValueError):
            EvalReport(
                model_kind="mlp",
                decision_threshold=0.5,
                n_samples=1,
                n_rows=2,
                accuracy=1.0,
                a1=0.6,
                ac=0.0,
                ah=1.0,
                af=0.6,
                confusion=[[1, 0], [0, 1]],
            )

    def test_report_table(self):
        dataset, _ = eval_dataset([[(0.9, 1), (0.7, 0)], [(0.2, 1), (0.1, 0)]])

        table = format_report(evaluate(ScoreModel(), dataset))

        for name in ("Testing Accuracy", "A1", "Ac", "Ah", "Af"):
            assert name in table
        assert "50.00%" in table


class TestLatencyBenchmark:
    def test_mean_below_p99(self):
        rows = np.random.default_rng(0).random((50, 6))

        stats = latency_benchmark(ScoreModel(), rows, repetitions=3)

        assert stats.n_rows == 50
        assert 0.0 < stats.mean_us <= stats.p99_us

    @pytest.mark.parametrize(("n_rows", "repetitions"), [(0, 5), (10, 2)])
    def test_rejects_bad_arguments(self, n_rows, repetitions):
        with pytest.raises(ValueError):
            latency_benchmark(ScoreModel(), np.zeros((n_rows, 6)), repetitions)


@pytest.mark.slow
class TestTrainedClassifiers:
    """Default-size models trained on closest-neighbor pairs, scored on 30,000 held-out events."""

    @pytest.fixture(scope="class")
    def training_set(self):
        events = generate_events(SimConfig(n_events=60_000, noise_mean=0.5, seed=31), threads=4)
        dataset, _ = extract_dataset(events, NegativeStrategy.CLOSEST, DatasetMode.TRAINING, 31, 4)
        return dataset

    @pytest.fixture(scope="class")
    def evaluation_set(self):
        events = generate_events(SimConfig(n_events=30_000, noise_mean=0.5, seed=32), threads=4)
        dataset, summary = extract_dataset(
            events, NegativeStrategy.CLOSEST, DatasetMode.EVALUATION, 32, 4
        )
        assert summary.n_samples >= 29_000
        assert len(dataset) / summary.n_samples >= 10
        return dataset

    @pytest.fixture(scope="class")
    def mlp(self, training_set):
        return mlp_train(training_set.features, training_set.labels, MlpHyperparams())

    @pytest.fixture(scope="class")
    def ert(self, training_set):
        return ert_train(training_set.features, training_set.labels, ErtHyperparams(), threads=4)

    def test_mlp_quality(self, mlp, evaluation_set):
        report = evaluate(mlp, evaluation_set)

        assert report.a1 >= 0.99
        assert report.af <= 0.01
        assert report.ah >= 0.97

    def test_ert_quality(self, ert, evaluation_set):
        report = evaluate(ert, evaluation_set)

        assert report.a1 >= 0.995

    @pytest.mark.parametrize(("model_name", "bound_us"), [("mlp", 1_000.0), ("ert", 5_000.0)])
    def test_single_row_latency(self, request, evaluation_set, model_name, bound_us):
        model = request.getfixturevalue(model_name)

        stats = latency_benchmark(model, evaluation_set.features[:200], repetitions=5)

        assert stats.mean_us < bound_us
