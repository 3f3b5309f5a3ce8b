import csv
import logging
from collections.abc import Iterator, Sequence
from enum import Enum
from pathlib import Path

import numpy as np
from pydantic import BaseModel as PydanticBase
from pydantic import ConfigDict, model_validator

from core.errors import (
    DataError,
    DatasetIntegrityError,
    DatasetParseError,
    IncompleteEventError,
    NoNegativeError,
)
from core.models import N_SUPERLAYERS, Event, TrackCandidate
from core.services.candidates import candidate_arrays, distances_to, truth_rows
from core.services.events import utf8_lines
from core.services.executor import ordered_map
from core.services.simulation import event_rng

logger = logging.getLogger(__name__)

INVALID = 0
VALID = 1

CSV_HEADER = ["event_id", *(f"f{k + 1}" for k in range(N_SUPERLAYERS)), "label"]


class NegativeStrategy(str, Enum):
    LEAST_LIKELY = "least-likely"
    RANDOM = "random"
    CLOSEST = "closest"


class DatasetMode(str, Enum):
    TRAINING = "training"
    EVALUATION = "evaluation"


class LabeledSample(PydanticBase):
    """Rows contributed by one event (training: one pair per truth track)."""

    event_id: int
    mode: DatasetMode
    features: np.ndarray
    labels: np.ndarray

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def check_rows(self):
        if self.features.ndim != 2 or self.features.shape[1] != N_SUPERLAYERS:
            raise ValueError(f"features must have shape (n, {N_SUPERLAYERS})")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("one label per row required")
        n_valid = int(np.count_nonzero(self.labels == VALID))
        n_invalid = len(self.labels) - n_valid
        if self.mode == DatasetMode.TRAINING:
            if n_valid != n_invalid or n_valid == 0:
                raise ValueError("training samples pair every valid row with one invalid row")
        elif n_valid != 1:
            raise ValueError(f"evaluation samples hold exactly one valid row, got {n_valid}")
        return self


class ExtractionSummary(PydanticBase):
    strategy: NegativeStrategy
    mode: DatasetMode
    n_events: int
    n_samples: int
    n_rows: int
    n_valid: int
    n_invalid: int
    skipped_no_negative: int = 0
    skipped_incomplete: int = 0
    skipped_unlabeled: int = 0
    skipped_multitrack: int = 0

    @property
    def skipped_events(self) -> int:
        return (
            self.skipped_no_negative
            + self.skipped_incomplete
            + self.skipped_unlabeled
            + self.skipped_multitrack
        )


class Dataset:
    """
    Labeled feature rows, grouped by event.

    Rows of one event are always contiguous; `samples()` walks those groups.
    """

    def __init__(self, event_ids: np.ndarray, features: np.ndarray, labels: np.ndarray):
        event_ids = np.asarray(event_ids, dtype=np.int64)
        features = np.asarray(features, dtype=np.float64).reshape(-1, N_SUPERLAYERS)
        labels = np.asarray(labels, dtype=np.int8)
        if not (len(event_ids) == len(features) == len(labels)):
            raise DatasetIntegrityError(
                f"column lengths differ: {len(event_ids)} ids, {len(features)} feature rows, "
                f"{len(labels)} labels"
            )
        if np.any((labels != INVALID) & (labels != VALID)):
            raise DatasetIntegrityError("labels must be 0 or 1")
        self.event_ids = event_ids
        self.features = features
        self.labels = labels

    @classmethod
    def empty(cls) -> "Dataset":
        return cls(np.empty(0), np.empty((0, N_SUPERLAYERS)), np.empty(0))

    @classmethod
    def from_samples(cls, samples: Sequence[LabeledSample]) -> "Dataset":
        if not samples:
            return cls.empty()
        return cls(
            np.concatenate([np.full(len(s.labels), s.event_id) for s in samples]),
            np.concatenate([s.features for s in samples]),
            np.concatenate([s.labels for s in samples]),
        )

    def __len__(self) -> int:
        return len(self.labels)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            np.array_equal(self.event_ids, other.event_ids)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.features, other.features)
        )

    def __repr__(self) -> str:
        return f"Dataset(rows={len(self)}, events={self.n_events})"

    def matches(self, other: "Dataset", rtol: float = 1e-8) -> bool:
        """Equality up to the precision the CSV format keeps (9 significant digits)."""
        return (
            np.array_equal(self.event_ids, other.event_ids)
            and np.array_equal(self.labels, other.labels)
            and np.allclose(self.features, other.features, rtol=rtol, atol=1e-12)
        )

    @property
    def n_valid(self) -> int:
        return int(np.count_nonzero(self.labels == VALID))

    @property
    def n_invalid(self) -> int:
        return len(self) - self.n_valid

    @property
    def n_events(self) -> int:
        return len(self.group_bounds())

    def group_bounds(self) -> list[tuple[int, int, int]]:
        """(event_id, start, stop) for each contiguous event group."""
        if len(self) == 0:
            return []
        breaks = np.flatnonzero(np.diff(self.event_ids)) + 1
        starts = np.concatenate(([0], breaks))
        stops = np.concatenate((breaks, [len(self)]))
        ids = self.event_ids[starts]
        if len(np.unique(ids)) != len(ids):
            raise DatasetIntegrityError("rows of an event are not contiguous")
        return [(int(e), int(a), int(b)) for e, a, b in zip(ids, starts, stops, strict=True)]

    def samples(self) -> Iterator[tuple[int, slice]]:
        for event_id, start, stop in self.group_bounds():
            yield event_id, slice(start, stop)

    def select_events(self, event_ids: set[int]) -> "Dataset":
        mask = np.isin(self.event_ids, np.fromiter(event_ids, dtype=np.int64, count=len(event_ids)))
        return Dataset(self.event_ids[mask], self.features[mask], self.labels[mask])


def _negative_row(
    features: np.ndarray,
    excluded: Sequence[int],
    reference: np.ndarray,
    strategy: NegativeStrategy,
    rng: np.random.Generator,
) -> int | None:
    allowed = np.ones(len(features), dtype=bool)
    allowed[list(excluded)] = False
    candidates = np.flatnonzero(allowed)
    if len(candidates) == 0:
        return None

    if strategy == NegativeStrategy.RANDOM:
        return int(candidates[rng.integers(len(candidates))])

    distances = distances_to(features[candidates], reference)
    # argmin/argmax return the first extreme, i.e. the lowest lexicographic source index
    if strategy == NegativeStrategy.CLOSEST:
        return int(candidates[np.argmin(distances)])
    return int(candidates[np.argmax(distances)])


def select_negative(
    candidates: Sequence[TrackCandidate],
    true_features: Sequence[float],
    strategy: NegativeStrategy,
    rng: np.random.Generator,
) -> TrackCandidate:
    """
    Pick the single false candidate paired with a true track.

    Candidates equal to the true features are never picked. Ties go to the
    candidate with the lowest lexicographic source index.
    """
    ordered = sorted(candidates, key=lambda c: c.source_indices)
    features = np.array([c.features for c in ordered], dtype=np.float64).reshape(
        -1, N_SUPERLAYERS
    )
    reference = np.asarray(true_features, dtype=np.float64)
    excluded = [i for i, c in enumerate(ordered) if c.is_true or c.features == tuple(reference)]

    row = _negative_row(features, excluded, reference, strategy, rng)
    if row is None:
        raise NoNegativeError()
    return ordered[row]


def _extract_event(
    event: Event, strategy: NegativeStrategy, mode: DatasetMode, seed: int
) -> LabeledSample | str:
    """Sample for one event, or the reason it was skipped."""
    if not event.is_labeled:
        return "unlabeled"
    if mode == DatasetMode.EVALUATION and len(event.truth_tracks) > 1:
        return "multitrack"
    try:
        features, _ = candidate_arrays(event)
    except IncompleteEventError:
        return "incomplete"

    positives = truth_rows(event)

    if mode == DatasetMode.EVALUATION:
        (positive,) = positives
        order = [positive, *(i for i in range(len(features)) if i != positive)]
        labels = np.full(len(order), INVALID, dtype=np.int8)
        labels[0] = VALID
        return LabeledSample(
            event_id=event.event_id, mode=mode, features=features[order], labels=labels
        )

    rng = event_rng(seed, event.event_id)
    rows: list[int] = []
    for positive in positives:
        negative = _negative_row(features, positives, features[positive], strategy, rng)
        if negative is None:
            return "no_negative"
        rows.extend((positive, negative))

    labels = np.tile(np.array([VALID, INVALID], dtype=np.int8), len(positives))
    return LabeledSample(event_id=event.event_id, mode=mode, features=features[rows], labels=labels)


def extract_dataset(
    events: Sequence[Event],
    strategy: NegativeStrategy,
    mode: DatasetMode,
    seed: int,
    threads: int = 1,
) -> tuple[Dataset, ExtractionSummary]:
    """
    Labeled rows from labeled events.

    Training mode: for each truth track, its candidate (valid) followed by one
    strategy-selected non-true candidate (invalid). Evaluation mode: the true
    candidate followed by every other candidate of the event.
    """
    events = sorted(events, key=lambda e: e.event_id)
    results = ordered_map(lambda e: _extract_event(e, strategy, mode, seed), events, threads)

    samples = [r for r in results if isinstance(r, LabeledSample)]
    skipped = {"no_negative": 0, "incomplete": 0, "unlabeled": 0, "multitrack": 0}
    for event, result in zip(events, results, strict=True):
        if isinstance(result, str):
            skipped[result] += 1
            logger.warning(f"Skipping event {event.event_id}: {result.replace('_', ' ')}")

    dataset = Dataset.from_samples(samples)
    summary = ExtractionSummary(
        strategy=strategy,
        mode=mode,
        n_events=len(events),
        n_samples=len(samples),
        n_rows=len(dataset),
        n_valid=dataset.n_valid,
        n_invalid=dataset.n_invalid,
        skipped_no_negative=skipped["no_negative"],
        skipped_incomplete=skipped["incomplete"],
        skipped_unlabeled=skipped["unlabeled"],
        skipped_multitrack=skipped["multitrack"],
    )
    logger.info(
        f"Extracted {summary.n_rows} rows ({summary.n_valid} valid, {summary.n_invalid} invalid) "
        f"from {summary.n_samples} samples, {summary.skipped_events} events skipped"
    )
    return dataset, summary


def split_dataset(dataset: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Event-granular split: no event contributes rows to both sides."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test fraction must lie in (0, 1), got {test_fraction}")
    if len(dataset) == 0:
        raise DatasetIntegrityError("cannot split an empty dataset")

    event_ids = [event_id for event_id, _, _ in dataset.group_bounds()]
    rng = np.random.default_rng(seed)
    shuffled = rng.permutation(np.asarray(event_ids, dtype=np.int64))
    n_test = round(test_fraction * len(event_ids))
    test_ids = {int(e) for e in shuffled[:n_test]}
    train_ids = set(event_ids) - test_ids
    return dataset.select_events(train_ids), dataset.select_events(test_ids)


def write_dataset(dataset: Dataset, path: Path) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for event_id, row, label in zip(
                dataset.event_ids, dataset.features, dataset.labels, strict=True
            ):
                writer.writerow([int(event_id), *(f"{x:.9g}" for x in row), int(label)])
    except OSError as e:
        raise DataError(f"cannot write dataset to {path}: {e}") from e
    logger.info(f"Wrote {len(dataset)} rows to {path}")


def read_dataset(path: Path) -> Dataset:
    event_ids: list[int] = []
    rows: list[list[float]] = []
    labels: list[int] = []
    try:
        with open(path, "rb") as f:
            reader = csv.reader(utf8_lines(f, path, DatasetParseError))
            header = next(reader, None)
            if header != CSV_HEADER:
                raise DatasetParseError(path, 1, f"expected header {','.join(CSV_HEADER)}")
            for line_number, record in enumerate(reader, start=2):
                if len(record) != len(CSV_HEADER):
                    raise DatasetParseError(
                        path, line_number, f"expected {len(CSV_HEADER)} fields, got {len(record)}"
                    )
                try:
                    event_id = int(record[0])
                    row = [float(x) for x in record[1:-1]]
                    label = int(record[-1])
                except ValueError as e:
                    raise DatasetParseError(path, line_number, str(e)) from e
                if label not in (INVALID, VALID):
                    raise DatasetParseError(path, line_number, f"label must be 0 or 1, got {label}")
                event_ids.append(event_id)
                rows.append(row)
                labels.append(label)
    except OSError as e:
        raise DataError(f"cannot read dataset from {path}: {e}") from e

    dataset = Dataset(np.array(event_ids), np.array(rows).reshape(-1, N_SUPERLAYERS), np.array(labels))
    logger.info(f"Read {len(dataset)} rows from {path}")
    return dataset
