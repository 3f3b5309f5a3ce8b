import pytest

from core.errors import DatasetIntegrityError
from core.services.classifiers.mlp import MlpHyperparams
from core.services.dataset import NegativeStrategy
from core.services.simulation import SimConfig, generate_events
from core.services.study import STUDY_STRATEGIES, StudyConfig, format_study, run_study, split_events

FAST_MLP = MlpHyperparams(hidden_layers=[16, 16], max_epochs=5, seed=3)


class TestSplitEvents:
    def test_partitions_events(self, noisy_events):
        train, test = split_events(noisy_events, 0.25, seed=0)

        assert len(test) == 15
        assert len(train) == 45
        assert not {e.event_id for e in train} & {e.event_id for e in test}

    def test_order_of_input_does_not_matter(self, noisy_events):
        forward = split_events(noisy_events, 0.3, seed=1)
        backward = split_events(list(reversed(noisy_events)), 0.3, seed=1)

        assert forward == backward

    def test_empty_event_set(self):
        with pytest.raises(DatasetIntegrityError):
            split_events([], 0.3, seed=0)


class TestRunStudy:
    @pytest.fixture(scope="class")
    def report(self):
        events = generate_events(SimConfig(n_events=120, noise_mean=1.0, seed=13))
        return run_study(events, StudyConfig(hyperparams=FAST_MLP, seed=2))

    def test_one_result_per_strategy(self, report):
        assert [r.strategy for r in report.results] == list(STUDY_STRATEGIES)
        assert report.n_train_events + report.n_test_events == 120

    def test_every_model_sees_the_same_test_set(self, report):
        rows = {r.report.n_rows for r in report.results}

        assert rows == {report.test_set.n_rows}
        assert report.test_set.strategy == NegativeStrategy.CLOSEST

    def test_best_strategy_has_fewest_false_positives(self, report):
        fewest = min(r.report.false_positives for r in report.results)

        assert report.result(report.best_strategy).report.false_positives == fewest

    def test_table_names_every_strategy(self, report):
        table = format_study(report)

        for strategy in STUDY_STRATEGIES:
            assert strategy.value in table
        assert f"Best training sample: {report.best_strategy.value}" in table

    def test_thread_count_does_not_change_results(self):
        events = generate_events(SimConfig(n_events=40, noise_mean=1.0, seed=14))
        config = StudyConfig(hyperparams=FAST_MLP)

        assert run_study(events, config, threads=1) == run_study(events, config, threads=3)

    def test_events_without_negatives(self, quiet_config):
        with pytest.raises(DatasetIntegrityError):
            run_study(generate_events(quiet_config), StudyConfig(hyperparams=FAST_MLP))


@pytest.mark.slow
class TestClosestNeighborStudy:
    def test_closest_training_has_fewest_false_positives(self):
        events = generate_events(SimConfig(n_events=20_000, noise_mean=0.5, seed=41))

        report = run_study(events, StudyConfig(seed=5), threads=3)

        closest = report.result(NegativeStrategy.CLOSEST).report
        for strategy in (NegativeStrategy.RANDOM, NegativeStrategy.LEAST_LIKELY):
            assert closest.false_positives < report.result(strategy).report.false_positives
        for result in report.results:
            assert result.report.a1 >= 0.99, result.strategy
        assert report.best_strategy == NegativeStrategy.CLOSEST
