import numpy as np
import pytest

from core.models import WIRES_PER_LAYER, Cluster, Event, TruthTrack
from core.services.dataset import Dataset
from core.services.simulation import SimConfig, generate_events


def pytest_addoption(parser):
    parser.addoption(
        "--runslow", action="store_true", default=False, help="run acceptance-scale tests"
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="acceptance-scale run, pass --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def make_event(
    wires_per_layer: list[list[float]],
    truth: list[int] | None = None,
    event_id: int = 0,
    momentum: float = 2.0,
    charge: int = 1,
) -> Event:
    """Event from raw wires, one list per super-layer; `truth` indexes one cluster in each."""
    clusters = tuple(
        tuple(Cluster(superlayer=k + 1, avg_wire=w) for w in wires)
        for k, wires in enumerate(wires_per_layer)
    )
    truth_tracks = ()
    if truth is not None:
        truth_tracks = (TruthTrack(cluster_indices=tuple(truth), momentum=momentum, charge=charge),)
    return Event(event_id=event_id, clusters=clusters, truth_tracks=truth_tracks)


def features_of(*wires: float) -> tuple[float, ...]:
    return tuple(w / WIRES_PER_LAYER for w in wires)


def eval_dataset(groups: list[list[tuple[float, int]]]) -> tuple[Dataset, np.ndarray]:
    """
    Evaluation dataset plus the p_valid each row should score.

    Each group is one event: (p_valid, label) per row. The first feature of
    every row carries its score so `ScoreModel` can echo it back.
    """
    event_ids, features, labels, scores = [], [], [], []
    for event_id, rows in enumerate(groups):
        for p_valid, label in rows:
            event_ids.append(event_id)
            features.append([p_valid, 0, 0, 0, 0, 0])
            labels.append(label)
            scores.append(p_valid)
    return Dataset(np.array(event_ids), np.array(features), np.array(labels)), np.array(scores)


def separable_rows(n: int, feature: int, seed: int, margin: float = 0.1):
    """Rows in [0, 1]^6, valid iff the chosen feature exceeds 0.5, none within `margin` of it."""
    rng = np.random.default_rng(seed)
    X = rng.random((n, 6))
    side = rng.random(n) < 0.5
    X[:, feature] = np.where(
        side, rng.uniform(0.5 + margin, 1.0, n), rng.uniform(0.0, 0.5 - margin, n)
    )
    return X, side.astype(np.int64)


@pytest.fixture
def quiet_config():
    """Noise-free single-track events: one candidate each."""
    return SimConfig(n_events=20, noise_mean=0.0, wire_noise_sigma=0.0, seed=11)


@pytest.fixture
def noisy_config():
    return SimConfig(n_events=60, noise_mean=0.6, seed=5)


@pytest.fixture
def noisy_events(noisy_config):
    return generate_events(noisy_config)


@pytest.fixture
def toy_event():
    """Truth at index 0 everywhere; a near twin in super-layer 3 and a far decoy in every layer."""
    truth = [56.0] * 6
    return make_event(
        [
            [56.0, 90.0],
            [56.0, 90.0],
            [56.0, 57.12, 90.0],
            [56.0, 90.0],
            [56.0, 90.0],
            [56.0, 90.0],
        ],
        truth=[0] * 6,
    ), features_of(*truth)
