import logging
from pathlib import Path

from django.core.management import call_command, load_command_class

from core.errors import DataError
from core.management.base import CommandResult, TrackcullCommand
from core.services.manifest import read_manifest, verify_outputs

logger = logging.getLogger(__name__)


class Command(TrackcullCommand):
    help = "Re-run a recorded command from its manifest and check its outputs match"

    writes_manifest = False

    def add_command_arguments(self, parser):
        parser.add_argument("manifest", help="Run manifest (*.manifest.json)")

    def run(self, options: dict) -> CommandResult:
        manifest = read_manifest(Path(options["manifest"]))
        try:
            command = load_command_class("core", manifest.command)
        except ModuleNotFoundError as e:
            raise self.usage_error(f"unknown command {manifest.command!r} in manifest") from e

        parser = command.create_parser("manage.py", manifest.command)
        positional = [action.dest for action in parser._actions if not action.option_strings]
        args = [str(manifest.options[dest]) for dest in positional if dest in manifest.options]
        kwargs = {key: value for key, value in manifest.options.items() if key not in positional}

        self.stdout.write(f"Replaying {manifest.command} {' '.join(args)}")
        call_command(command, *args, stdout=self.stdout, **kwargs)

        matches = verify_outputs(manifest)
        for path, same in matches.items():
            status = self.style.SUCCESS("identical") if same else self.style.ERROR("differs")
            self.stdout.write(f"{path}: {status}")
        if not all(matches.values()):
            raise DataError("replayed outputs differ from the recorded run")
        self.stdout.write(self.style.SUCCESS(f"Replay of {manifest.command} reproduced every output"))
        return CommandResult(outputs={}, summary={"matches": matches})
