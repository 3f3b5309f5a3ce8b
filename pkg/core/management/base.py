import json
import logging
import sys
import time
from contextlib import contextmanager
from enum import Enum
from functools import partial
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError, CommandParser
from pydantic import BaseModel as PydanticBase
from pydantic import ConfigDict, Field, ValidationError

from core.errors import DataError
from core.services.manifest import write_manifest

logger = logging.getLogger(__name__)

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR"]

# Options every Django command carries; they never change what a run produces
DJANGO_OPTIONS = {
    "verbosity",
    "settings",
    "pythonpath",
    "traceback",
    "no_color",
    "force_color",
    "skip_checks",
    "stdout",
    "stderr",
}


class CommandResult(PydanticBase):
    # written file -> top-level JSON keys holding timings; the first file is the primary output
    outputs: dict[Path, tuple[str, ...]]
    summary: dict = Field(default_factory=dict)
    timing: dict[str, float] = Field(default_factory=dict)

    model_config = ConfigDict(arbitrary_types_allowed=True)


def _usage_error(parser: CommandParser, message: str):
    if parser.called_from_command_line:
        parser.print_usage(sys.stderr)
        parser.exit(EXIT_USAGE, f"{parser.prog}: error: {message}\n")
    raise CommandError(f"Error: {message}", returncode=EXIT_USAGE)


def recordable(options: dict) -> dict:
    """Options as plain JSON values, without Django's own switches."""

    def plain(value):
        if isinstance(value, Path):
            return str(value)
        if isinstance(value, Enum):
            return value.value
        if isinstance(value, (list, tuple)):
            return [plain(v) for v in value]
        return value

    return {key: plain(value) for key, value in options.items() if key not in DJANGO_OPTIONS}


class TrackcullCommand(BaseCommand):
    """
    Shared plumbing for the reproduction commands.

    Subclasses implement `add_command_arguments` and `run`. Errors map onto
    exit codes: bad flags 1, bad input data 2, anything else 3. Configs built
    inside `option_values()` count as flags. Every successful run leaves a
    manifest beside its primary output.
    """

    requires_system_checks = []
    # replay leaves the recorded manifest untouched
    writes_manifest = True

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        parser.error = partial(_usage_error, parser)
        return parser

    def add_arguments(self, parser):
        self.add_command_arguments(parser)
        parser.add_argument("--seed", type=int, default=settings.TRACKCULL_SEED)
        parser.add_argument(
            "--threads",
            type=int,
            default=settings.TRACKCULL_THREADS,
            help="Worker threads for parallel stages (timing runs always use one)",
        )
        parser.add_argument("--output-dir", default=str(settings.TRACKCULL_OUTPUT_DIR))
        parser.add_argument("--log-level", choices=LOG_LEVELS, default=None)

    def add_command_arguments(self, parser):
        pass

    def run(self, options: dict) -> CommandResult:
        raise NotImplementedError

    def usage_error(self, message: str) -> CommandError:
        return CommandError(message, returncode=EXIT_USAGE)

    @contextmanager
    def option_values(self):
        """Wrap config construction from options; validation failures are usage errors."""
        try:
            yield
        except ValidationError as e:
            problems = "; ".join(
                f"{'.'.join(str(p) for p in err['loc']) or 'value'}: {err['msg']}" for err in e.errors()
            )
            raise self.usage_error(f"invalid options: {problems}") from e

    def output_path(self, options: dict, name: str) -> Path:
        output_dir = Path(options["output_dir"])
        output_dir.mkdir(parents=True, exist_ok=True)
        path = output_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def write_json(self, path: Path, document: PydanticBase | dict) -> None:
        if isinstance(document, PydanticBase):
            document = document.model_dump(mode="json")
        try:
            path.write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")
        except OSError as e:
            raise DataError(f"cannot write {path}: {e}") from e

    def handle(self, *args, **options):
        if options.get("log_level"):
            logging.getLogger("core").setLevel(options["log_level"])
        if options["threads"] < 1:
            raise self.usage_error(f"--threads must be at least 1, got {options['threads']}")

        started = time.perf_counter()
        try:
            result = self.run(options)
            if self.writes_manifest and result.outputs:
                timing = {"total_seconds": time.perf_counter() - started, **result.timing}
                write_manifest(
                    self.command_name(),
                    recordable(options),
                    result.outputs,
                    result.summary,
                    timing,
                )
        except CommandError:
            raise
        except DataError as e:
            logger.error(f"{self.command_name()} failed on its input: {e}")
            raise CommandError(str(e), returncode=EXIT_DATA) from e
        except Exception as e:
            logger.exception(f"{self.command_name()} failed")
            raise CommandError(f"internal error: {e}", returncode=EXIT_INTERNAL) from e

    def command_name(self) -> str:
        return self.__module__.rsplit(".", 1)[-1]
