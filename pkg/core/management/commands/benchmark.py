import logging
from pathlib import Path

from core.errors import DataError
from core.management.base import CommandResult, TrackcullCommand
from core.services.classifiers import load_model
from core.services.events import read_events
from core.services.reconstruction import (
    DEFAULT_MOMENTUM_EDGES,
    FitConfig,
    RecoRun,
    compare,
    efficiency_csv,
    run_ai_assisted,
    run_conventional,
)

logger = logging.getLogger(__name__)

TIMING_KEYS = ("seconds_conv", "seconds_ai", "speedup", "time_saved_fraction")


def median_run(runs: list[RecoRun]) -> RecoRun:
    return sorted(runs, key=lambda run: run.total_seconds)[len(runs) // 2]


class Command(TrackcullCommand):
    help = "Compare conventional and classifier-assisted reconstruction: efficiency per momentum bin and speedup"

    def add_command_arguments(self, parser):
        parser.add_argument("events", help="Labeled event file (JSON lines)")
        parser.add_argument("model", help="Model JSON written by train")
        parser.add_argument("--threshold", type=float, default=0.5)
        parser.add_argument(
            "--bins",
            type=float,
            nargs="+",
            default=list(map(float, DEFAULT_MOMENTUM_EDGES)),
            help="Momentum bin edges in GeV",
        )
        parser.add_argument(
            "--chi2-cut", type=float, default=FitConfig().chi2_cut, help="Mean squared residual cut"
        )
        parser.add_argument("--curvature-scale", type=float, default=FitConfig().curvature_scale)
        parser.add_argument(
            "--no-fallback",
            action="store_true",
            help="Fit nothing when no candidate reaches the threshold",
        )
        parser.add_argument(
            "--timing-runs", type=int, default=3, help="Runs per path; the median is reported"
        )
        parser.add_argument("-o", "--output", default="efficiency.json")

    def run(self, options: dict) -> CommandResult:
        if not 0.0 <= options["threshold"] <= 1.0:
            raise self.usage_error(f"--threshold must lie in [0, 1], got {options['threshold']}")
        if options["timing_runs"] < 1:
            raise self.usage_error("--timing-runs must be at least 1")

        with self.option_values():
            config = FitConfig(
                chi2_cut=options["chi2_cut"],
                curvature_scale=options["curvature_scale"],
                fallback=not options["no_fallback"],
            )
        events = read_events(Path(options["events"]))
        if not events:
            raise DataError(f"{options['events']} holds no events")
        model = load_model(Path(options["model"]))

        # timing runs stay on one thread whatever --threads says
        conv = median_run([run_conventional(events, config) for _ in range(options["timing_runs"])])
        ai = median_run(
            [
                run_ai_assisted(events, model, options["threshold"], config)
                for _ in range(options["timing_runs"])
            ]
        )
        try:
            report = compare(
                ai,
                conv,
                events,
                options["bins"],
                decision_threshold=options["threshold"],
                fallback=config.fallback,
                threads=1,
            )
        except ValueError as e:
            raise self.usage_error(str(e)) from e

        path = self.output_path(options, options["output"])
        self.write_json(path, report)
        csv_path = path.with_suffix(".csv")
        try:
            csv_path.write_text(efficiency_csv(report), encoding="utf-8")
        except OSError as e:
            raise DataError(f"cannot write {csv_path}: {e}") from e

        self.stdout.write(f"{'bin (GeV)':<14} {'ratio':>8} {'n_ai':>7} {'n_conv':>7}")
        for b in report.bins:
            ratio = "-" if b.ratio is None else f"{b.ratio:.4f}"
            self.stdout.write(f"{f'{b.low:g}-{b.high:g}':<14} {ratio:>8} {b.n_ai:>7} {b.n_conv:>7}")
        self.stdout.write(
            f"\nCandidates fitted: {report.fits_conv} conventional, {report.fits_ai} AI-assisted"
        )
        if report.speedup is not None:
            self.stdout.write(
                f"Speedup: {report.speedup:.2f}x on {report.threads} thread "
                f"({(report.time_saved_fraction or 0) * 100:.0f}% less time)"
            )
        self.stdout.write(self.style.SUCCESS(f"Wrote {path} and {csv_path}"))

        return CommandResult(
            outputs={path: TIMING_KEYS, csv_path: ()},
            summary={
                "events": report.n_events,
                "fits_conv": report.fits_conv,
                "fits_ai": report.fits_ai,
                "candidate_reduction": report.candidate_reduction,
            },
            timing={
                "seconds_conv": report.seconds_conv,
                "seconds_ai": report.seconds_ai,
                "speedup": report.speedup or 0.0,
            },
        )
