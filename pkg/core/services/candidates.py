import logging
from collections.abc import Sequence

import numpy as np

from core.errors import IncompleteEventError
from core.models import GEOMETRY, N_SUPERLAYERS, WIRES_PER_LAYER, Event, TrackCandidate

logger = logging.getLogger(__name__)


def normalize_wire(avg_wire: float) -> float:
    return GEOMETRY.check_wire(avg_wire) / GEOMETRY.wires_per_layer


def check_complete(event: Event) -> None:
    for superlayer, count in enumerate(event.cluster_counts, start=1):
        if count == 0:
            raise IncompleteEventError(superlayer, event.event_id)


def candidate_arrays(event: Event) -> tuple[np.ndarray, np.ndarray]:
    """
    Every combination of one cluster per super-layer, as arrays.

    Returns (features, indices) of shapes (n, 6): normalized average wires and
    the source cluster index in each super-layer. Rows are in lexicographic
    order of the index tuple, which is also the order of `generate_candidates`.
    """
    check_complete(event)

    indices = np.indices(event.cluster_counts).reshape(N_SUPERLAYERS, -1).T
    features = np.empty(indices.shape, dtype=np.float64)
    for k in range(N_SUPERLAYERS):
        wires = np.asarray(event.wires(k + 1), dtype=np.float64) / WIRES_PER_LAYER
        features[:, k] = wires[indices[:, k]]
    return features, indices


def truth_rows(event: Event) -> list[int]:
    """Row positions of the truth combinations inside `candidate_arrays(event)`."""
    counts = event.cluster_counts
    return [
        int(np.ravel_multi_index(track.cluster_indices, counts)) for track in event.truth_tracks
    ]


def generate_candidates(event: Event) -> list[TrackCandidate]:
    features, indices = candidate_arrays(event)
    truth = event.truth_index_sets()

    candidates = []
    for row, source in zip(features, indices, strict=True):
        source_indices = tuple(int(i) for i in source)
        candidates.append(
            TrackCandidate(
                features=tuple(float(f) for f in row),
                source_indices=source_indices,
                is_true=(source_indices in truth) if event.is_labeled else None,
            )
        )

    logger.debug(f"Event {event.event_id}: {len(candidates)} candidates from {event.cluster_counts}")
    return candidates


def candidate_distance(a: Sequence[float], b: Sequence[float]) -> float:
    """L1 distance between two normalized feature vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != (N_SUPERLAYERS,) or b.shape != (N_SUPERLAYERS,):
        raise ValueError(f"expected two {N_SUPERLAYERS}-vectors, got {a.shape} and {b.shape}")
    return float(np.abs(a - b).sum())


def distances_to(features: np.ndarray, reference: Sequence[float]) -> np.ndarray:
    """Row-wise `candidate_distance` of every row of `features` to `reference`."""
    return np.abs(features - np.asarray(reference, dtype=np.float64)).sum(axis=1)
