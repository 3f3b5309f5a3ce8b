from typing import Literal

from pydantic import BaseModel as PydanticBase
from pydantic import ConfigDict, Field, field_validator, model_validator

from core.errors import WireRangeError

N_SUPERLAYERS = 6
WIRES_PER_LAYER = 112
N_REGIONS = 3
LAYERS_PER_SUPERLAYER = 6


class Geometry(PydanticBase):
    n_superlayers: int = N_SUPERLAYERS
    wires_per_layer: int = WIRES_PER_LAYER
    n_regions: int = N_REGIONS
    layers_per_superlayer: int = LAYERS_PER_SUPERLAYER

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_constants(self):
        if self.n_superlayers != N_SUPERLAYERS or self.wires_per_layer != WIRES_PER_LAYER:
            raise ValueError(
                f"geometry is fixed at {N_SUPERLAYERS} super-layers of {WIRES_PER_LAYER} wires"
            )
        if self.n_regions * 2 != self.n_superlayers:
            raise ValueError("each region holds two super-layers")
        return self

    def check_wire(self, avg_wire: float) -> float:
        if not 0.0 <= avg_wire <= self.wires_per_layer:
            raise WireRangeError(avg_wire, self.wires_per_layer)
        return avg_wire


GEOMETRY = Geometry()


class Cluster(PydanticBase):
    superlayer: int = Field(ge=1, le=N_SUPERLAYERS)
    avg_wire: float

    model_config = ConfigDict(frozen=True)

    @field_validator("avg_wire")
    @classmethod
    def check_wire(cls, value: float) -> float:
        return GEOMETRY.check_wire(value)


class TruthTrack(PydanticBase):
    cluster_indices: tuple[int, ...] = Field(min_length=N_SUPERLAYERS, max_length=N_SUPERLAYERS)
    momentum: float = Field(gt=0.0)
    charge: Literal[-1, 1]

    model_config = ConfigDict(frozen=True)

    @field_validator("cluster_indices")
    @classmethod
    def check_indices(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if any(i < 0 for i in value):
            raise ValueError(f"cluster indices must be non-negative, got {value}")
        return value


class Event(PydanticBase):
    """All clusters of one sector, grouped by super-layer (list k holds super-layer k+1)."""

    event_id: int
    clusters: tuple[tuple[Cluster, ...], ...] = Field(
        min_length=N_SUPERLAYERS, max_length=N_SUPERLAYERS
    )
    truth_tracks: tuple[TruthTrack, ...] = ()

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_grouping(self):
        for position, layer in enumerate(self.clusters, start=1):
            for cluster in layer:
                if cluster.superlayer != position:
                    raise ValueError(
                        f"cluster of super-layer {cluster.superlayer} stored under super-layer {position}"
                    )
        for track in self.truth_tracks:
            for position, (index, layer) in enumerate(
                zip(track.cluster_indices, self.clusters, strict=True), start=1
            ):
                if index >= len(layer):
                    raise ValueError(
                        f"truth index {index} out of range for super-layer {position} "
                        f"({len(layer)} clusters)"
                    )
        return self

    @property
    def cluster_counts(self) -> tuple[int, ...]:
        return tuple(len(layer) for layer in self.clusters)

    @property
    def candidate_count(self) -> int:
        count = 1
        for n in self.cluster_counts:
            count *= n
        return count

    @property
    def is_labeled(self) -> bool:
        return bool(self.truth_tracks)

    def wires(self, superlayer: int) -> list[float]:
        return [cluster.avg_wire for cluster in self.clusters[superlayer - 1]]

    def truth_index_sets(self) -> set[tuple[int, ...]]:
        return {track.cluster_indices for track in self.truth_tracks}


class TrackCandidate(PydanticBase):
    features: tuple[float, ...] = Field(min_length=N_SUPERLAYERS, max_length=N_SUPERLAYERS)
    source_indices: tuple[int, ...] = Field(min_length=N_SUPERLAYERS, max_length=N_SUPERLAYERS)
    is_true: bool | None = None

    model_config = ConfigDict(frozen=True)

    @field_validator("features")
    @classmethod
    def check_features(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        if any(not 0.0 <= f <= 1.0 for f in value):
            raise ValueError(f"features must lie in [0, 1], got {value}")
        return value
