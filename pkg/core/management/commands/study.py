import logging
from pathlib import Path

from core.management.base import CommandResult, TrackcullCommand
from core.management.commands.train import MLP_DEFAULTS
from core.services.classifiers import MlpHyperparams
from core.services.events import read_events
from core.services.metrics import format_confusion
from core.services.study import StudyConfig, format_study, run_study

logger = logging.getLogger(__name__)


class Command(TrackcullCommand):
    help = "Train one MLP per negative-sample strategy and cross-evaluate on closest-neighbor pairs"

    def add_command_arguments(self, parser):
        parser.add_argument("events", help="Labeled event file (JSON lines)")
        parser.add_argument("--test-fraction", type=float, default=StudyConfig().test_fraction)
        parser.add_argument("--threshold", type=float, default=0.5)
        parser.add_argument("--hidden-layers", type=int, nargs="+", default=MLP_DEFAULTS.hidden_layers)
        parser.add_argument("--batch-size", type=int, default=MLP_DEFAULTS.batch_size)
        parser.add_argument("--learning-rate", type=float, default=MLP_DEFAULTS.initial_lr)
        parser.add_argument("--max-epochs", type=int, default=MLP_DEFAULTS.max_epochs)
        parser.add_argument("-o", "--output", default="study.json")

    def run(self, options: dict) -> CommandResult:
        with self.option_values():
            config = StudyConfig(
                test_fraction=options["test_fraction"],
                decision_threshold=options["threshold"],
                hyperparams=MlpHyperparams(
                    hidden_layers=options["hidden_layers"],
                    batch_size=options["batch_size"],
                    initial_lr=options["learning_rate"],
                    max_epochs=options["max_epochs"],
                    seed=options["seed"],
                ),
                seed=options["seed"],
            )
        events = read_events(Path(options["events"]))
        report = run_study(events, config, options["threads"])

        path = self.output_path(options, options["output"])
        self.write_json(path, report)

        for result in report.results:
            self.stdout.write(f"\nTrained on {result.strategy.value} sample:")
            self.stdout.write(format_confusion(result.report.confusion))
        self.stdout.write("")
        self.stdout.write(format_study(report))
        self.stdout.write(self.style.SUCCESS(f"Wrote {path}"))

        return CommandResult(
            outputs={path: ()},
            summary={
                "best_strategy": report.best_strategy.value,
                "false_positives": {
                    r.strategy.value: r.report.false_positives for r in report.results
                },
            },
        )
