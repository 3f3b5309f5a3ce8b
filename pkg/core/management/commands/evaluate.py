import logging
from pathlib import Path

from django.conf import settings

from core.management.base import CommandResult, TrackcullCommand
from core.services.classifiers import load_model
from core.services.dataset import read_dataset
from core.services.metrics import MIN_REPETITIONS, evaluate, format_report, latency_benchmark

logger = logging.getLogger(__name__)


class Command(TrackcullCommand):
    help = "Score a model on an evaluation dataset: accuracy, A1/Ac/Ah/Af, confusion, latency"

    def add_command_arguments(self, parser):
        parser.add_argument("model", help="Model JSON written by train")
        parser.add_argument("dataset", help="Evaluation-mode dataset CSV")
        parser.add_argument("--threshold", type=float, default=0.5)
        parser.add_argument(
            "--repetitions",
            type=int,
            default=5,
            help="Timed passes over the latency rows; 0 skips latency",
        )
        parser.add_argument(
            "--latency-rows", type=int, default=settings.TRACKCULL_LATENCY_ROWS
        )
        parser.add_argument("-o", "--output", default="report.json")

    def run(self, options: dict) -> CommandResult:
        if not 0.0 <= options["threshold"] <= 1.0:
            raise self.usage_error(f"--threshold must lie in [0, 1], got {options['threshold']}")
        if options["repetitions"] and options["repetitions"] < MIN_REPETITIONS:
            raise self.usage_error(f"--repetitions must be 0 or at least {MIN_REPETITIONS}")

        model = load_model(Path(options["model"]))
        dataset = read_dataset(Path(options["dataset"]))
        report = evaluate(model, dataset, options["threshold"])

        if options["repetitions"] and options["latency_rows"] > 0:
            rows = dataset.features[: options["latency_rows"]]
            report.latency = latency_benchmark(model, rows, options["repetitions"])

        path = self.output_path(options, options["output"])
        self.write_json(path, report)

        self.stdout.write(format_report(report))
        self.stdout.write(
            self.style.SUCCESS(
                f"\nEvaluated {report.n_samples} samples ({report.n_rows} rows) -> {path}"
            )
        )
        timing = {}
        if report.latency is not None:
            timing = {"latency_mean_us": report.latency.mean_us, "latency_p99_us": report.latency.p99_us}
        return CommandResult(
            outputs={path: ("latency",)},
            summary={
                "a1": report.a1,
                "ac": report.ac,
                "ah": report.ah,
                "af": report.af,
                "accuracy": report.accuracy,
                "false_positives": report.false_positives,
                "rows_per_sample": report.n_rows / report.n_samples,
            },
            timing=timing,
        )
