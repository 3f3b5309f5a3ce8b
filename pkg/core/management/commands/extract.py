import json
import logging
from pathlib import Path

from core.management.base import CommandResult, TrackcullCommand
from core.services.dataset import (
    DatasetMode,
    NegativeStrategy,
    extract_dataset,
    split_dataset,
    write_dataset,
)
from core.services.events import read_events

logger = logging.getLogger(__name__)


class Command(TrackcullCommand):
    help = "Extract a labeled candidate dataset (CSV) from an event file"

    def add_command_arguments(self, parser):
        parser.add_argument("events", help="Event file (JSON lines)")
        parser.add_argument(
            "--strategy",
            choices=[s.value for s in NegativeStrategy],
            default=NegativeStrategy.CLOSEST.value,
            help="How the negative paired with each true track is chosen",
        )
        parser.add_argument(
            "--mode", choices=[m.value for m in DatasetMode], default=DatasetMode.TRAINING.value
        )
        parser.add_argument(
            "--split",
            type=float,
            default=None,
            metavar="FRACTION",
            help="Also write event-granular train/test CSVs with this test fraction",
        )
        parser.add_argument("-o", "--output", default="dataset.csv")

    def run(self, options: dict) -> CommandResult:
        split = options["split"]
        if split is not None and not 0.0 < split < 1.0:
            raise self.usage_error(f"--split must lie strictly between 0 and 1, got {split}")

        events = read_events(Path(options["events"]))
        dataset, summary = extract_dataset(
            events,
            NegativeStrategy(options["strategy"]),
            DatasetMode(options["mode"]),
            options["seed"],
            options["threads"],
        )
        path = self.output_path(options, options["output"])
        write_dataset(dataset, path)
        outputs = {path: ()}

        if split is not None:
            train, test = split_dataset(dataset, split, options["seed"])
            for suffix, part in (("train", train), ("test", test)):
                part_path = path.with_name(f"{path.stem}.{suffix}{path.suffix}")
                write_dataset(part, part_path)
                outputs[part_path] = ()
            self.stdout.write(f"Split: {train.n_events} train events, {test.n_events} test events")

        report = summary.model_dump(mode="json") | {"skipped_events": summary.skipped_events}
        self.stdout.write(json.dumps(report, indent=2))
        if summary.skipped_events:
            self.stdout.write(self.style.WARNING(f"{summary.skipped_events} events skipped"))
        self.stdout.write(
            self.style.SUCCESS(f"Wrote {summary.n_valid} valid / {summary.n_invalid} invalid rows to {path}")
        )
        return CommandResult(outputs=outputs, summary=report)
