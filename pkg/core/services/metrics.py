"""
Per-sample track-candidate metrics.

A sample is one event's rows: its single valid candidate and every invalid
one. A1 is the fraction of samples whose valid row is predicted valid and Af
the fraction where it is not. Ac and Ah are fractions of the detected (A1)
samples: Ac counts samples with at least one invalid row also predicted valid,
Ah those where the valid row holds the strictly highest valid probability.
"""

import logging
import time

import numpy as np
from pydantic import BaseModel as PydanticBase
from pydantic import Field, model_validator

from core.errors import DatasetIntegrityError
from core.services.classifiers.base import Classifier
from core.services.dataset import INVALID, VALID, Dataset

logger = logging.getLogger(__name__)

MIN_REPETITIONS = 3

CORNER_LABEL = "actual \\ predicted"


class LatencyStats(PydanticBase):
    n_rows: int
    repetitions: int
    mean_us: float
    p99_us: float


class EvalReport(PydanticBase):
    model_kind: str
    decision_threshold: float
    n_samples: int
    n_rows: int
    accuracy: float
    a1: float
    ac: float
    ah: float
    af: float
    # confusion[actual][predicted], 0 = invalid, 1 = valid
    confusion: list[list[int]]
    training_accuracy: float | None = None
    latency: LatencyStats | None = None

    @model_validator(mode="after")
    def check_identities(self):
        if abs(self.a1 + self.af - 1.0) > 1e-12 and self.n_samples:
            raise ValueError("a1 and af must sum to 1")
        if sum(map(sum, self.confusion)) != self.n_rows:
            raise ValueError("confusion matrix must account for every row")
        return self

    @property
    def false_positives(self) -> int:
        return self.confusion[INVALID][VALID]

    @property
    def false_negatives(self) -> int:
        return self.confusion[VALID][INVALID]


class SampleOutcomes(PydanticBase):
    n_samples: int = Field(ge=0)
    detected: int = Field(ge=0)
    contaminated: int = Field(ge=0)
    top_ranked: int = Field(ge=0)


def confusion_matrix(predictions, truth) -> list[list[int]]:
    predictions = np.asarray(predictions, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if predictions.shape != truth.shape:
        raise ValueError(
            f"prediction and truth lengths differ: {predictions.shape[0]} vs {truth.shape[0]}"
        )
    counts = np.zeros((2, 2), dtype=np.int64)
    np.add.at(counts, (truth, predictions), 1)
    return counts.tolist()


def sample_outcomes(dataset: Dataset, p_valid: np.ndarray, threshold: float) -> SampleOutcomes:
    predicted = p_valid >= threshold
    detected = contaminated = top_ranked = 0
    n_samples = 0

    for event_id, rows in dataset.samples():
        labels = dataset.labels[rows]
        valid_positions = np.flatnonzero(labels == VALID)
        if len(valid_positions) != 1:
            raise DatasetIntegrityError(
                f"event {event_id} has {len(valid_positions)} valid rows, expected exactly 1"
            )
        n_samples += 1
        valid = valid_positions[0]
        if not predicted[rows][valid]:
            continue

        detected += 1
        scores = p_valid[rows]
        others = np.delete(scores, valid)
        if predicted[rows][labels == INVALID].any():
            contaminated += 1
        if len(others) == 0 or scores[valid] > others.max():
            top_ranked += 1

    return SampleOutcomes(
        n_samples=n_samples, detected=detected, contaminated=contaminated, top_ranked=top_ranked
    )


def evaluate(model: Classifier, dataset: Dataset, decision_threshold: float = 0.5) -> EvalReport:
    if len(dataset) == 0:
        raise DatasetIntegrityError("cannot evaluate on an empty dataset")

    p_valid = model.predict_proba(dataset.features)[:, VALID]
    outcomes = sample_outcomes(dataset, p_valid, decision_threshold)
    predicted = (p_valid >= decision_threshold).astype(np.int64)
    confusion = confusion_matrix(predicted, dataset.labels)

    a1 = outcomes.detected / outcomes.n_samples
    report = EvalReport(
        model_kind=model.KIND,
        decision_threshold=decision_threshold,
        n_samples=outcomes.n_samples,
        n_rows=len(dataset),
        accuracy=(confusion[INVALID][INVALID] + confusion[VALID][VALID]) / len(dataset),
        a1=a1,
        af=1.0 - a1,
        ac=outcomes.contaminated / outcomes.detected if outcomes.detected else 0.0,
        ah=outcomes.top_ranked / outcomes.detected if outcomes.detected else 0.0,
        confusion=confusion,
        training_accuracy=model.metadata.train_accuracy,
    )
    logger.info(
        f"Evaluated {model.KIND} on {report.n_samples} samples / {report.n_rows} rows: "
        f"A1 {report.a1:.4f}, Ac {report.ac:.4f}, Ah {report.ah:.4f}"
    )
    return report


def latency_benchmark(model: Classifier, rows: np.ndarray, repetitions: int = 5) -> LatencyStats:
    """Single-row inference time, one warm-up pass excluded."""
    rows = np.asarray(rows, dtype=np.float64)
    if len(rows) == 0:
        raise ValueError("latency needs at least one row")
    if repetitions < MIN_REPETITIONS:
        raise ValueError(f"latency needs at least {MIN_REPETITIONS} repetitions, got {repetitions}")

    for row in rows:
        model.predict_one(row)

    per_row = np.empty(len(rows) * repetitions, dtype=np.float64)
    for rep in range(repetitions):
        for i, row in enumerate(rows):
            started = time.perf_counter()
            model.predict_one(row)
            per_row[rep * len(rows) + i] = time.perf_counter() - started

    per_row *= 1e6
    stats = LatencyStats(
        n_rows=len(rows),
        repetitions=repetitions,
        mean_us=float(per_row.mean()),
        p99_us=float(np.percentile(per_row, 99, method="higher")),
    )
    logger.info(f"{model.KIND} latency: mean {stats.mean_us:.1f} us, p99 {stats.p99_us:.1f} us")
    return stats


def _percent(value: float | None) -> str:
    return "n/a" if value is None else f"{value * 100:.2f}%"


def format_report(report: EvalReport) -> str:
    rows = [
        ("Training Accuracy", _percent(report.training_accuracy)),
        ("Testing Accuracy", _percent(report.accuracy)),
        ("A1", _percent(report.a1)),
        ("Ac", _percent(report.ac)),
        ("Ah", _percent(report.ah)),
        ("Af", _percent(report.af)),
    ]
    if report.latency is not None:
        rows.append(("Time to Predict/sample", f"{report.latency.mean_us:.1f} us"))
        rows.append(("Time to Predict/sample (p99)", f"{report.latency.p99_us:.1f} us"))

    width = max(len(name) for name, _ in rows)
    lines = [f"{'Metric':<{width}} | Result", f"{'-' * width}-+-{'-' * 12}"]
    lines += [f"{name:<{width}} | {value}" for name, value in rows]
    lines.append("")
    lines.append(format_confusion(report.confusion))
    return "\n".join(lines)


def format_confusion(confusion: list[list[int]]) -> str:
    cells = [[f"{count:,}" for count in row] for row in confusion]
    width = max(len("invalid"), *(len(c) for row in cells for c in row))
    header = f"{CORNER_LABEL:<18} | {'invalid':>{width}} | {'valid':>{width}}"
    lines = [header]
    for name, row in zip(("invalid", "valid"), cells, strict=True):
        lines.append(f"{name:<18} | {row[0]:>{width}} | {row[1]:>{width}}")
    return "\n".join(lines)
