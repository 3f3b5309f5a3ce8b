import hashlib
import json
import logging
import platform
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import django
import numpy as np
import pydantic
from pydantic import BaseModel as PydanticBase
from pydantic import Field, ValidationError

from core.errors import DataError

logger = logging.getLogger(__name__)

MANIFEST_SUFFIX = ".manifest.json"


class OutputRecord(PydanticBase):
    sha256: str
    # top-level JSON keys holding wall-clock measurements, left out of the digest
    timing_keys: list[str] = Field(default_factory=list)


class RunManifest(PydanticBase):
    command: str
    options: dict
    versions: dict[str, str]
    outputs: dict[str, OutputRecord] = Field(default_factory=dict)
    summary: dict = Field(default_factory=dict)
    timing: dict[str, float] = Field(default_factory=dict)


def package_versions() -> dict[str, str]:
    try:
        trackcull = version("trackcull")
    except PackageNotFoundError:
        trackcull = "unknown"
    return {
        "trackcull": trackcull,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "django": django.get_version(),
        "pydantic": pydantic.VERSION,
    }


def file_sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def output_digest(path: Path, timing_keys: list[str] | tuple[str, ...] = ()) -> str:
    if not timing_keys:
        return file_sha256(path)
    document = json.loads(Path(path).read_text(encoding="utf-8"))
    for key in timing_keys:
        document.pop(key, None)
    canonical = json.dumps(document, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def manifest_path(primary_output: Path) -> Path:
    primary_output = Path(primary_output)
    return primary_output.with_name(primary_output.stem + MANIFEST_SUFFIX)


def write_manifest(
    command: str,
    options: dict,
    outputs: dict[Path, tuple[str, ...]],
    summary: dict | None = None,
    timing: dict[str, float] | None = None,
) -> Path:
    """
    Record a finished run next to its primary (first) output.

    `outputs` maps each written file to the JSON keys that carry timings.
    """
    try:
        records = {
            str(path): OutputRecord(sha256=output_digest(path, keys), timing_keys=list(keys))
            for path, keys in outputs.items()
        }
    except OSError as e:
        raise DataError(f"cannot checksum run outputs: {e}") from e

    manifest = RunManifest(
        command=command,
        options=options,
        versions=package_versions(),
        outputs=records,
        summary=summary or {},
        timing=timing or {},
    )
    path = manifest_path(next(iter(outputs)))
    try:
        path.write_text(json.dumps(manifest.model_dump(), indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot write manifest to {path}: {e}") from e
    logger.info(f"Wrote run manifest {path}")
    return path


def read_manifest(path: Path) -> RunManifest:
    try:
        return RunManifest.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise DataError(f"cannot read manifest {path}: {e}") from e
    except UnicodeDecodeError as e:
        raise DataError(f"manifest {path} is not UTF-8 text: {e.reason} at byte {e.start}") from e
    except ValidationError as e:
        raise DataError(f"{path} is not a run manifest: {e.errors()[0]['msg']}") from e


def verify_outputs(manifest: RunManifest) -> dict[str, bool]:
    """Whether each recorded output still matches its recorded digest."""
    matches = {}
    for path, record in manifest.outputs.items():
        try:
            matches[path] = output_digest(Path(path), record.timing_keys) == record.sha256
        except (OSError, UnicodeDecodeError, json.JSONDecodeError):
            matches[path] = False
    return matches
