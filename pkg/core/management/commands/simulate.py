import logging

import numpy as np

from core.management.base import CommandResult, TrackcullCommand
from core.services.simulation import SimConfig, generate_sample_set

logger = logging.getLogger(__name__)

DEFAULTS = SimConfig()


class Command(TrackcullCommand):
    help = "Generate labeled synthetic drift-chamber events as JSON lines"

    def add_command_arguments(self, parser):
        parser.add_argument("--events", type=int, default=DEFAULTS.n_events)
        parser.add_argument("--tracks-per-event", type=int, default=DEFAULTS.tracks_per_event)
        parser.add_argument(
            "--noise-mean",
            type=float,
            default=DEFAULTS.noise_mean,
            help="Mean number of noise clusters per super-layer (Poisson)",
        )
        parser.add_argument("--momentum-min", type=float, default=DEFAULTS.momentum_range[0])
        parser.add_argument("--momentum-max", type=float, default=DEFAULTS.momentum_range[1])
        parser.add_argument("--curvature-scale", type=float, default=DEFAULTS.curvature_scale)
        parser.add_argument("--wire-noise-sigma", type=float, default=DEFAULTS.wire_noise_sigma)
        parser.add_argument("-o", "--output", default="events.jsonl")

    def run(self, options: dict) -> CommandResult:
        with self.option_values():
            config = SimConfig(
                n_events=options["events"],
                tracks_per_event=options["tracks_per_event"],
                noise_mean=options["noise_mean"],
                momentum_range=(options["momentum_min"], options["momentum_max"]),
                curvature_scale=options["curvature_scale"],
                wire_noise_sigma=options["wire_noise_sigma"],
                seed=options["seed"],
            )
        path = self.output_path(options, options["output"])
        events = generate_sample_set(config, path, options["threads"])

        counts = [event.candidate_count for event in events]
        mean_candidates = float(np.mean(counts)) if counts else 0.0
        self.stdout.write(f"Events written: {len(events)} -> {path}")
        self.stdout.write(f"Mean candidates/event: {mean_candidates:.1f}")
        self.stdout.write(self.style.SUCCESS(f"Simulated {len(events)} events"))

        return CommandResult(
            outputs={path: ()},
            summary={"events": len(events), "mean_candidates_per_event": mean_candidates},
        )
