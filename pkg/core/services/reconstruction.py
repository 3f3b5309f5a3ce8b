"""
Conventional vs classifier-assisted reconstruction on synthetic events.

Both paths fit candidates with a quadratic least-squares surrogate and keep,
per event, the accepted candidate of lowest chi2. The conventional path fits
every combination; the assisted path fits only the candidates the classifier
scores at or above the decision threshold.
"""

import logging
import time
from collections.abc import Sequence

import numpy as np
from pydantic import BaseModel as PydanticBase
from pydantic import ConfigDict, Field

from core.errors import DataError, IncompleteEventError
from core.models import N_SUPERLAYERS, WIRES_PER_LAYER, Event
from core.services.candidates import candidate_arrays
from core.services.classifiers.base import Classifier
from core.services.simulation import SUPERLAYER_STEPS

logger = logging.getLogger(__name__)

CONVENTIONAL = "conventional"
AI_ASSISTED = "ai-assisted"

DEFAULT_MOMENTUM_EDGES = (0.5, *range(1, 11))

DESIGN_MATRIX = np.stack([np.ones(N_SUPERLAYERS), SUPERLAYER_STEPS, SUPERLAYER_STEPS**2], axis=1)

# Fitted curvature at or below this, in wires per step squared, is a straight track
STRAIGHT_CURVATURE = 1e-9
# Mean squared residual of an exact fit is float round-off below this
ROUNDOFF_CHI2 = 1e-20


class FitConfig(PydanticBase):
    chi2_cut: float = Field(default=3 * 0.3**2, ge=0.0)
    curvature_scale: float = Field(default=8.0, ge=0.0)
    fallback: bool = True

    model_config = ConfigDict(frozen=True)


class FitResult(PydanticBase):
    accepted: bool
    chi2: float = Field(ge=0.0)
    momentum_estimate: float | None = None
    fitted_coefficients: tuple[float, float, float]


class RecoOutput(PydanticBase):
    event_id: int
    chosen: tuple[int, ...] | None = None
    chi2: float | None = None
    momentum_estimate: float | None = None
    candidates_total: int = Field(ge=0)
    candidates_fitted: int = Field(ge=0)
    fit_seconds: float = Field(ge=0.0)


class RecoRun(PydanticBase):
    path: str
    outputs: list[RecoOutput]
    skipped_incomplete: int = 0

    @property
    def total_seconds(self) -> float:
        return sum(o.fit_seconds for o in self.outputs)

    @property
    def candidates_fitted(self) -> int:
        return sum(o.candidates_fitted for o in self.outputs)

    @property
    def reconstructed(self) -> int:
        return sum(o.chosen is not None for o in self.outputs)


class EfficiencyBin(PydanticBase):
    low: float
    high: float
    n_events: int
    n_ai: int
    n_conv: int
    ratio: float | None
    efficiency_ai: float | None
    efficiency_conv: float | None


class EfficiencyReport(PydanticBase):
    bins: list[EfficiencyBin]
    decision_threshold: float
    fallback: bool
    n_events: int
    threads: int = 1
    seconds_conv: float
    seconds_ai: float
    speedup: float | None
    time_saved_fraction: float | None
    fits_conv: int
    fits_ai: int
    candidate_reduction: float | None
    skipped_incomplete: int = 0


def fit_wires(wires: np.ndarray, config: FitConfig) -> FitResult:
    """Fit one candidate given its six wire positions in super-layer order."""
    coefficients, _, _, _ = np.linalg.lstsq(DESIGN_MATRIX, wires, rcond=None)
    residuals = wires - DESIGN_MATRIX @ coefficients
    chi2 = float(residuals @ residuals) / N_SUPERLAYERS
    if chi2 < ROUNDOFF_CHI2:
        chi2 = 0.0
    a, b, c = (float(x) for x in coefficients)
    if abs(c) <= STRAIGHT_CURVATURE:
        c = 0.0
    return FitResult(
        accepted=chi2 <= config.chi2_cut,
        chi2=chi2,
        momentum_estimate=config.curvature_scale / abs(c) if c != 0 else None,
        fitted_coefficients=(a, b, c),
    )


def surrogate_fit(points: Sequence[tuple[int, float]], config: FitConfig | None = None) -> FitResult:
    """Quadratic least-squares fit of wire against super-layer step k = superlayer - 1."""
    config = config or FitConfig()
    if len(points) != N_SUPERLAYERS:
        raise ValueError(f"a fit needs {N_SUPERLAYERS} points, got {len(points)}")
    ordered = sorted(points)
    if [sl for sl, _ in ordered] != list(range(1, N_SUPERLAYERS + 1)):
        raise ValueError(f"points must cover super-layers 1..{N_SUPERLAYERS} once each")
    return fit_wires(np.array([w for _, w in ordered], dtype=np.float64), config)


def _best_fit(
    event_id: int,
    features: np.ndarray,
    indices: np.ndarray,
    rows: np.ndarray,
    config: FitConfig,
    started: float,
) -> RecoOutput:
    best_row: int | None = None
    best: FitResult | None = None
    # candidates are fitted one at a time
    for row in rows:
        result = fit_wires(features[row] * WIRES_PER_LAYER, config)
        if result.accepted and (best is None or result.chi2 < best.chi2):
            best_row, best = int(row), result
    return RecoOutput(
        event_id=event_id,
        chosen=None if best_row is None else tuple(int(i) for i in indices[best_row]),
        chi2=None if best is None else best.chi2,
        momentum_estimate=None if best is None else best.momentum_estimate,
        candidates_total=len(features),
        candidates_fitted=len(rows),
        fit_seconds=time.perf_counter() - started,
    )


def _conventional_event(event: Event, config: FitConfig) -> RecoOutput:
    started = time.perf_counter()
    features, indices = candidate_arrays(event)
    return _best_fit(event.event_id, features, indices, np.arange(len(features)), config, started)


def _assisted_event(
    event: Event, model: Classifier, threshold: float, config: FitConfig
) -> RecoOutput:
    started = time.perf_counter()
    features, indices = candidate_arrays(event)
    p_valid = model.score(features)
    rows = np.flatnonzero(p_valid >= threshold)
    if len(rows) == 0 and config.fallback:
        rows = np.array([int(np.argmax(p_valid))])
    return _best_fit(event.event_id, features, indices, rows, config, started)


def _run(path: str, events: Sequence[Event], process) -> RecoRun:
    outputs: list[RecoOutput] = []
    skipped = 0
    for event in events:
        try:
            outputs.append(process(event))
        except IncompleteEventError as e:
            skipped += 1
            logger.warning(f"Skipping event {event.event_id} on the {path} path: {e}")
    run = RecoRun(path=path, outputs=outputs, skipped_incomplete=skipped)
    logger.info(
        f"{path}: {run.reconstructed}/{len(outputs)} events reconstructed, "
        f"{run.candidates_fitted} candidates fitted in {run.total_seconds:.3f}s"
    )
    return run


def run_conventional(events: Sequence[Event], config: FitConfig | None = None) -> RecoRun:
    config = config or FitConfig()
    return _run(CONVENTIONAL, events, lambda event: _conventional_event(event, config))


def run_ai_assisted(
    events: Sequence[Event],
    model: Classifier,
    decision_threshold: float = 0.5,
    config: FitConfig | None = None,
) -> RecoRun:
    config = config or FitConfig()
    return _run(
        AI_ASSISTED,
        events,
        lambda event: _assisted_event(event, model, decision_threshold, config),
    )


def _ratio(numerator: float, denominator: float) -> float | None:
    return numerator / denominator if denominator else None


def compare(
    reco_ai: RecoRun,
    reco_conv: RecoRun,
    events: Sequence[Event],
    momentum_edges: Sequence[float] = DEFAULT_MOMENTUM_EDGES,
    decision_threshold: float = 0.5,
    fallback: bool = True,
    threads: int = 1,
) -> EfficiencyReport:
    """
    Per momentum bin, events where each path chose the truth candidate.

    Events are binned by the generated momentum of their first truth track;
    unlabeled events and events outside the edges are not binned.
    """
    edges = np.asarray(momentum_edges, dtype=np.float64)
    if len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError(f"momentum bin edges must be increasing, got {list(momentum_edges)}")

    ai_by_event = {o.event_id: o for o in reco_ai.outputs}
    conv_by_event = {o.event_id: o for o in reco_conv.outputs}
    if ai_by_event.keys() != conv_by_event.keys():
        raise DataError("the two reconstruction runs cover different events")

    n_bins = len(edges) - 1
    n_events = np.zeros(n_bins, dtype=np.int64)
    n_ai = np.zeros(n_bins, dtype=np.int64)
    n_conv = np.zeros(n_bins, dtype=np.int64)

    for event in events:
        if event.event_id not in ai_by_event or not event.truth_tracks:
            continue
        truth = event.truth_tracks[0]
        position = int(np.searchsorted(edges, truth.momentum, side="right")) - 1
        if truth.momentum == edges[-1]:
            position = n_bins - 1
        if not 0 <= position < n_bins:
            continue
        n_events[position] += 1
        n_ai[position] += ai_by_event[event.event_id].chosen == truth.cluster_indices
        n_conv[position] += conv_by_event[event.event_id].chosen == truth.cluster_indices

    bins = [
        EfficiencyBin(
            low=float(edges[i]),
            high=float(edges[i + 1]),
            n_events=int(n_events[i]),
            n_ai=int(n_ai[i]),
            n_conv=int(n_conv[i]),
            ratio=_ratio(int(n_ai[i]), int(n_conv[i])),
            efficiency_ai=_ratio(int(n_ai[i]), int(n_events[i])),
            efficiency_conv=_ratio(int(n_conv[i]), int(n_events[i])),
        )
        for i in range(n_bins)
    ]

    seconds_conv = reco_conv.total_seconds
    seconds_ai = reco_ai.total_seconds
    return EfficiencyReport(
        bins=bins,
        decision_threshold=decision_threshold,
        fallback=fallback,
        n_events=len(ai_by_event),
        threads=threads,
        seconds_conv=seconds_conv,
        seconds_ai=seconds_ai,
        speedup=_ratio(seconds_conv, seconds_ai),
        time_saved_fraction=1.0 - seconds_ai / seconds_conv if seconds_conv else None,
        fits_conv=reco_conv.candidates_fitted,
        fits_ai=reco_ai.candidates_fitted,
        candidate_reduction=_ratio(reco_conv.candidates_fitted, reco_ai.candidates_fitted),
        skipped_incomplete=reco_conv.skipped_incomplete,
    )


def efficiency_csv(report: EfficiencyReport) -> str:
    lines = ["bin_low,bin_high,ratio,n_ai,n_conv"]
    for b in report.bins:
        ratio = "" if b.ratio is None else f"{b.ratio:.6g}"
        lines.append(f"{b.low:g},{b.high:g},{ratio},{b.n_ai},{b.n_conv}")
    return "\n".join(lines) + "\n"
