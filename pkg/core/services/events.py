import json
import logging
from collections.abc import Iterable, Iterator
from pathlib import Path

from pydantic import ValidationError

from core.errors import DataError, EventParseError, ParseError
from core.models import N_SUPERLAYERS, Cluster, Event, TruthTrack

logger = logging.getLogger(__name__)


def event_to_record(event: Event) -> dict:
    return {
        "event_id": event.event_id,
        "clusters": [
            {"sl": cluster.superlayer, "avg_wire": cluster.avg_wire}
            for layer in event.clusters
            for cluster in layer
        ],
        "truth": [
            {
                "indices": list(track.cluster_indices),
                "momentum": track.momentum,
                "charge": track.charge,
            }
            for track in event.truth_tracks
        ],
    }


def event_from_record(record: dict) -> Event:
    grouped: list[list[Cluster]] = [[] for _ in range(N_SUPERLAYERS)]
    for item in record["clusters"]:
        cluster = Cluster(superlayer=item["sl"], avg_wire=item["avg_wire"])
        grouped[cluster.superlayer - 1].append(cluster)

    truth = [
        TruthTrack(
            cluster_indices=tuple(item["indices"]),
            momentum=item["momentum"],
            charge=item["charge"],
        )
        for item in record.get("truth", [])
    ]
    return Event(
        event_id=record["event_id"],
        clusters=tuple(tuple(layer) for layer in grouped),
        truth_tracks=tuple(truth),
    )


def dump_event(event: Event) -> str:
    return json.dumps(event_to_record(event), separators=(",", ":"))


def write_events(events: Iterable[Event], path: Path) -> int:
    count = 0
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for event in events:
                f.write(dump_event(event))
                f.write("\n")
                count += 1
    except OSError as e:
        raise DataError(f"cannot write events to {path}: {e}") from e
    logger.info(f"Wrote {count} events to {path}")
    return count


def utf8_lines(lines: Iterable[bytes], path: Path, error: type[ParseError]) -> Iterator[str]:
    """Decode raw file lines, reporting bytes that are not UTF-8 against their line."""
    for line_number, raw in enumerate(lines, start=1):
        try:
            yield raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise error(path, line_number, f"not valid UTF-8 ({e.reason})") from e


def iter_events(path: Path) -> Iterator[Event]:
    try:
        f = open(path, "rb")
    except OSError as e:
        raise DataError(f"cannot read events from {path}: {e}") from e

    with f:
        for line_number, line in enumerate(utf8_lines(f, path, EventParseError), start=1):
            if not line.strip():
                continue
            try:
                yield event_from_record(json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError, ValidationError) as e:
                raise EventParseError(path, line_number, str(e).splitlines()[0]) from e


def read_events(path: Path) -> list[Event]:
    events = list(iter_events(path))
    logger.info(f"Read {len(events)} events from {path}")
    return events
