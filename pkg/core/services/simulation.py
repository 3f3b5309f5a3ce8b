"""
Synthetic drift-chamber events.

A track leaves one cluster per super-layer whose average wire follows a
quadratic in the super-layer index k = 0..5:

    wire(k) = intercept + slope * k + charge * (curvature_scale / momentum) * k**2 + noise

Noise clusters are uniform over the wire range with Poisson multiplicity per
super-layer. Clusters within a super-layer are stored sorted by wire, so the
position of the track cluster carries no information.
"""

import logging
from pathlib import Path

import numpy as np
from pydantic import BaseModel as PydanticBase
from pydantic import ConfigDict, Field, model_validator

from core.errors import GenerationError
from core.models import N_SUPERLAYERS, WIRES_PER_LAYER, Cluster, Event, TruthTrack
from core.services.events import write_events
from core.services.executor import ordered_map

logger = logging.getLogger(__name__)

MAX_PLACEMENT_ATTEMPTS = 100

# Wire change between the first and last super-layer, per super-layer step,
# before bending is added.
CHORD_SLOPE_RANGE = (-10.0, 10.0)

SUPERLAYER_STEPS = np.arange(N_SUPERLAYERS, dtype=np.float64)


class SimConfig(PydanticBase):
    n_events: int = Field(default=1000, ge=0)
    tracks_per_event: int = Field(default=1, ge=1)
    noise_mean: float = Field(default=2.0, ge=0.0)
    momentum_range: tuple[float, float] = (0.5, 10.0)
    curvature_scale: float = Field(default=8.0, ge=0.0)
    wire_noise_sigma: float = Field(default=0.3, ge=0.0)
    seed: int = 0

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_momentum_range(self):
        p_min, p_max = self.momentum_range
        if p_min <= 0 or p_min > p_max:
            raise ValueError(f"momentum range must satisfy 0 < p_min <= p_max, got {self.momentum_range}")
        return self


def event_rng(seed: int, event_id: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, event_id]))


def track_wires(
    momentum: float, charge: int, intercept: float, slope: float, curvature_scale: float
) -> np.ndarray:
    curvature = charge * curvature_scale / momentum
    return intercept + slope * SUPERLAYER_STEPS + curvature * SUPERLAYER_STEPS**2


def _draw_placement(
    momentum: float, charge: int, curvature_scale: float, rng: np.random.Generator
) -> tuple[float, float] | None:
    curvature = charge * curvature_scale / momentum
    last = N_SUPERLAYERS - 1
    slope = rng.uniform(*CHORD_SLOPE_RANGE) - curvature * last
    shape = slope * SUPERLAYER_STEPS + curvature * SUPERLAYER_STEPS**2
    low, high = -shape.min(), WIRES_PER_LAYER - shape.max()
    if low > high:
        return None
    return float(rng.uniform(low, high)), float(slope)


def _initial_placement(
    momentum: float, charge: int, curvature_scale: float, rng: np.random.Generator
) -> tuple[float, float]:
    for _ in range(MAX_PLACEMENT_ATTEMPTS):
        placement = _draw_placement(momentum, charge, curvature_scale, rng)
        if placement is not None:
            return placement
    raise GenerationError(
        f"no intercept/slope keeps a track of momentum {momentum:.3f} GeV inside the chamber"
    )


def generate_track(
    config: SimConfig,
    momentum: float,
    charge: int,
    intercept: float,
    slope: float,
    rng: np.random.Generator,
) -> tuple[TruthTrack, list[Cluster]]:
    """
    Lay one track across the six super-layers.

    The given intercept and slope are tried first; when the track (noise
    included) leaves the wire range a fresh intercept/slope is drawn, up to
    MAX_PLACEMENT_ATTEMPTS times. The returned TruthTrack has placeholder
    cluster indices; `generate_event` fills in the real ones.
    """
    for _ in range(MAX_PLACEMENT_ATTEMPTS):
        wires = track_wires(momentum, charge, intercept, slope, config.curvature_scale)
        if config.wire_noise_sigma > 0:
            wires = wires + rng.normal(0.0, config.wire_noise_sigma, N_SUPERLAYERS)
        if np.all((wires >= 0.0) & (wires <= WIRES_PER_LAYER)):
            clusters = [
                Cluster(superlayer=k + 1, avg_wire=float(w)) for k, w in enumerate(wires)
            ]
            track = TruthTrack(
                cluster_indices=(0,) * N_SUPERLAYERS, momentum=momentum, charge=charge
            )
            return track, clusters

        placement = _draw_placement(momentum, charge, config.curvature_scale, rng)
        if placement is not None:
            intercept, slope = placement

    raise GenerationError(
        f"could not place a track of momentum {momentum:.3f} GeV, charge {charge:+d} "
        f"after {MAX_PLACEMENT_ATTEMPTS} attempts"
    )


def generate_event(config: SimConfig, event_id: int, rng: np.random.Generator) -> Event:
    layers: list[list[tuple[float, int | None]]] = [[] for _ in range(N_SUPERLAYERS)]
    tracks: list[TruthTrack] = []

    for track_number in range(config.tracks_per_event):
        momentum = float(rng.uniform(*config.momentum_range))
        charge = int(rng.choice((-1, 1)))
        intercept, slope = _initial_placement(momentum, charge, config.curvature_scale, rng)

        track, clusters = generate_track(config, momentum, charge, intercept, slope, rng)
        tracks.append(track)
        for cluster in clusters:
            layers[cluster.superlayer - 1].append((cluster.avg_wire, track_number))

    for layer in layers:
        n_noise = int(rng.poisson(config.noise_mean)) if config.noise_mean > 0 else 0
        for wire in rng.uniform(0.0, WIRES_PER_LAYER, n_noise):
            layer.append((float(wire), None))

    grouped: list[tuple[Cluster, ...]] = []
    track_indices = [[0] * N_SUPERLAYERS for _ in tracks]
    for k, layer in enumerate(layers):
        layer.sort(key=lambda item: item[0])
        for position, (_, owner) in enumerate(layer):
            if owner is not None:
                track_indices[owner][k] = position
        grouped.append(tuple(Cluster(superlayer=k + 1, avg_wire=w) for w, _ in layer))

    truth = tuple(
        track.model_copy(update={"cluster_indices": tuple(indices)})
        for track, indices in zip(tracks, track_indices, strict=True)
    )
    return Event(event_id=event_id, clusters=tuple(grouped), truth_tracks=truth)


def generate_events(config: SimConfig, threads: int = 1) -> list[Event]:
    def build(event_id: int) -> Event:
        return generate_event(config, event_id, event_rng(config.seed, event_id))

    return ordered_map(build, range(config.n_events), threads)


def generate_sample_set(config: SimConfig, path: Path, threads: int = 1) -> list[Event]:
    logger.info(
        f"Simulating {config.n_events} events (seed {config.seed}, noise mean "
        f"{config.noise_mean}, {config.tracks_per_event} track(s)/event)"
    )
    events = generate_events(config, threads)
    write_events(events, path)
    return events
