"""
Negative-sampling strategy study.

One MLP is trained per negative-sample strategy on the same training events,
then all of them are scored on pairs built with the closest-neighbor strategy
from held-out events, the hardest negatives of the three.
"""

import logging
from collections.abc import Sequence

import numpy as np
from pydantic import BaseModel as PydanticBase
from pydantic import Field

from core.errors import DatasetIntegrityError
from core.models import Event
from core.services.classifiers.mlp import MlpHyperparams, mlp_train
from core.services.dataset import DatasetMode, ExtractionSummary, NegativeStrategy, extract_dataset
from core.services.executor import ordered_map
from core.services.metrics import EvalReport, evaluate

logger = logging.getLogger(__name__)

STUDY_STRATEGIES = (NegativeStrategy.CLOSEST, NegativeStrategy.RANDOM, NegativeStrategy.LEAST_LIKELY)


class StudyConfig(PydanticBase):
    test_fraction: float = Field(default=0.3, gt=0.0, lt=1.0)
    decision_threshold: float = Field(default=0.5, ge=0.0, le=1.0)
    hyperparams: MlpHyperparams = Field(default_factory=MlpHyperparams)
    seed: int = 0


class StrategyResult(PydanticBase):
    strategy: NegativeStrategy
    training: ExtractionSummary
    report: EvalReport


class StudyReport(PydanticBase):
    n_train_events: int
    n_test_events: int
    test_set: ExtractionSummary
    results: list[StrategyResult]
    best_strategy: NegativeStrategy

    def result(self, strategy: NegativeStrategy) -> StrategyResult:
        return next(r for r in self.results if r.strategy == strategy)


def split_events(
    events: Sequence[Event], test_fraction: float, seed: int
) -> tuple[list[Event], list[Event]]:
    ordered = sorted(events, key=lambda e: e.event_id)
    if not ordered:
        raise DatasetIntegrityError("cannot split an empty event set")
    shuffled = np.random.default_rng(seed).permutation(len(ordered))
    test_positions = set(shuffled[: round(test_fraction * len(ordered))].tolist())
    train = [e for i, e in enumerate(ordered) if i not in test_positions]
    test = [e for i, e in enumerate(ordered) if i in test_positions]
    return train, test


def run_study(events: Sequence[Event], config: StudyConfig, threads: int = 1) -> StudyReport:
    train_events, test_events = split_events(events, config.test_fraction, config.seed)
    # each held-out sample needs exactly one valid row
    test_events = [e for e in test_events if len(e.truth_tracks) == 1]
    logger.info(
        f"Strategy study: {len(train_events)} training events, {len(test_events)} test events"
    )

    test_set, test_summary = extract_dataset(
        test_events, NegativeStrategy.CLOSEST, DatasetMode.TRAINING, config.seed, threads
    )
    if len(test_set) == 0:
        raise DatasetIntegrityError("no held-out event produced a closest-neighbor pair")

    def fit(strategy: NegativeStrategy) -> StrategyResult:
        train_set, summary = extract_dataset(
            train_events, strategy, DatasetMode.TRAINING, config.seed
        )
        if len(train_set) == 0:
            raise DatasetIntegrityError(f"no training rows for strategy {strategy.value}")
        model = mlp_train(train_set.features, train_set.labels, config.hyperparams)
        report = evaluate(model, test_set, config.decision_threshold)
        logger.info(
            f"{strategy.value}-trained model: {report.false_positives} false positives, "
            f"{report.false_negatives} false negatives on the closest-neighbor test set"
        )
        return StrategyResult(strategy=strategy, training=summary, report=report)

    results = ordered_map(fit, STUDY_STRATEGIES, threads)
    best = min(results, key=lambda r: r.report.false_positives)
    return StudyReport(
        n_train_events=len(train_events),
        n_test_events=len(test_events),
        test_set=test_summary,
        results=results,
        best_strategy=best.strategy,
    )


def format_study(report: StudyReport) -> str:
    header = ["Training sample", "TN", "FP", "FN", "TP", "A1", "Ac", "Ah"]
    table = []
    for r in report.results:
        (tn, fp), (fn, tp) = r.report.confusion
        table.append(
            [
                r.strategy.value,
                *(f"{x:,}" for x in (tn, fp, fn, tp)),
                *(f"{x * 100:.2f}%" for x in (r.report.a1, r.report.ac, r.report.ah)),
            ]
        )
    widths = [max(len(row[i]) for row in (header, *table)) for i in range(len(header))]
    lines = [" | ".join(cell.ljust(w) for cell, w in zip(header, widths, strict=True))]
    lines.append("-+-".join("-" * w for w in widths))
    lines += [" | ".join(cell.ljust(w) for cell, w in zip(row, widths, strict=True)) for row in table]
    lines.append(f"\nBest training sample: {report.best_strategy.value}")
    return "\n".join(lines)
