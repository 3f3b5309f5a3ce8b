import numpy as np
import pytest
from pydantic import ValidationError

from core.errors import DataError, EventParseError, GenerationError
from core.models import WIRES_PER_LAYER
from core.services.events import read_events
from core.services.simulation import (
    SimConfig,
    event_rng,
    generate_event,
    generate_events,
    generate_sample_set,
    generate_track,
)

NOISELESS = SimConfig(wire_noise_sigma=0.0)


class TestSimConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"momentum_range": (0.0, 1.0)},
            {"momentum_range": (5.0, 1.0)},
            {"wire_noise_sigma": -0.1},
            {"curvature_scale": -1.0},
            {"n_events": -1},
        ],
    )
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValidationError):
            SimConfig(**kwargs)


class TestGenerateTrack:
    def test_straight_line(self):
        config = SimConfig(wire_noise_sigma=0.0, curvature_scale=0.0)

        _, clusters = generate_track(config, 3.0, 1, 10.0, 5.0, np.random.default_rng(0))

        assert [c.avg_wire for c in clusters] == [10.0, 15.0, 20.0, 25.0, 30.0, 35.0]

    def test_quadratic_bending(self):
        track, clusters = generate_track(NOISELESS, 2.0, 1, 10.0, 0.0, np.random.default_rng(0))

        assert [c.avg_wire for c in clusters] == pytest.approx([10, 14, 26, 46, 74, 110])
        assert [c.superlayer for c in clusters] == [1, 2, 3, 4, 5, 6]
        assert track.momentum == 2.0
        assert track.charge == 1

    def test_replaces_placement_that_leaves_chamber(self):
        rng = np.random.default_rng(4)

        _, clusters = generate_track(NOISELESS, 2.0, 1, 100.0, 0.0, rng)

        wires = [c.avg_wire for c in clusters]
        assert all(0.0 <= w <= WIRES_PER_LAYER for w in wires)
        assert wires[0] != 100.0

    def test_unplaceable_track_raises(self):
        config = SimConfig(wire_noise_sigma=0.0, curvature_scale=1000.0)

        with pytest.raises(GenerationError):
            generate_track(config, 0.5, 1, 10.0, 0.0, np.random.default_rng(0))

    def test_doubling_momentum_halves_curvature(self):
        rng = np.random.default_rng(0)
        _, slow = generate_track(NOISELESS, 2.0, -1, 100.0, 0.0, rng)
        _, fast = generate_track(NOISELESS, 4.0, -1, 100.0, 0.0, rng)

        k = np.arange(6)
        quad_slow = np.polyfit(k, [c.avg_wire for c in slow], 2)[0]
        quad_fast = np.polyfit(k, [c.avg_wire for c in fast], 2)[0]
        assert quad_fast == pytest.approx(quad_slow / 2)


class TestGenerateEvent:
    def test_noise_free_event_has_one_candidate(self, quiet_config):
        event = generate_event(quiet_config, 3, event_rng(quiet_config.seed, 3))

        assert event.cluster_counts == (1,) * 6
        assert event.candidate_count == 1
        assert event.truth_tracks[0].cluster_indices == (0,) * 6

    def test_truth_lies_on_a_quadratic(self, quiet_config):
        k = np.arange(6)
        for event in generate_events(quiet_config):
            track = event.truth_tracks[0]
            wires = [event.clusters[s][i].avg_wire for s, i in enumerate(track.cluster_indices)]
            coeffs = np.polyfit(k, wires, 2)
            assert np.max(np.abs(np.polyval(coeffs, k) - wires)) < 1e-9

    def test_clusters_sorted_within_superlayer(self, noisy_events):
        for event in noisy_events:
            for k in range(1, 7):
                wires = event.wires(k)
                assert wires == sorted(wires)

    def test_every_track_gets_its_own_indices(self):
        config = SimConfig(n_events=10, tracks_per_event=3, noise_mean=1.0, seed=2)
        for event in generate_events(config):
            assert len(event.truth_tracks) == 3
            assert len(event.truth_index_sets()) == 3

    def test_same_seed_same_events(self, noisy_config):
        assert generate_events(noisy_config) == generate_events(noisy_config)

    def test_thread_count_does_not_change_events(self, noisy_config):
        assert generate_events(noisy_config, threads=4) == generate_events(noisy_config, threads=1)

    def test_mean_candidate_count_near_poisson_expectation(self):
        # E[1 + N] = 3 for N ~ Poisson(2); E[prod] = 3**6 with independent layers
        events = generate_events(SimConfig(n_events=4000, noise_mean=2.0, seed=1))
        mean = np.mean([e.candidate_count for e in events])
        assert mean == pytest.approx(729, rel=0.1)


class TestGenerateSampleSet:
    def test_zero_events_gives_empty_file(self, tmp_path):
        path = tmp_path / "events.jsonl"

        generate_sample_set(SimConfig(n_events=0), path)

        assert path.read_bytes() == b""

    def test_round_trip(self, tmp_path):
        path = tmp_path / "events.jsonl"
        config = SimConfig(n_events=100, seed=9)

        events = generate_sample_set(config, path)

        text = path.read_text()
        assert text.endswith("\n")
        assert len(text.splitlines()) == 100
        assert read_events(path) == events

    def test_seed_changes_file(self, tmp_path):
        first, second = tmp_path / "a.jsonl", tmp_path / "b.jsonl"

        generate_sample_set(SimConfig(n_events=5, seed=1), first)
        generate_sample_set(SimConfig(n_events=5, seed=2), second)

        assert first.read_bytes() != second.read_bytes()


class TestReadEvents:
    def test_bytes_outside_utf8_report_their_line(self, tmp_path):
        path = tmp_path / "events.jsonl"
        generate_sample_set(SimConfig(n_events=2, seed=4), path)
        path.write_bytes(path.read_bytes() + b'{"event_id": 9, "clusters": "\xff\xfe"}\n')

        with pytest.raises(EventParseError) as exc_info:
            read_events(path)

        assert isinstance(exc_info.value, DataError)
        assert exc_info.value.line == 3
        assert "UTF-8" in exc_info.value.reason

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            read_events(tmp_path / "absent.jsonl")
