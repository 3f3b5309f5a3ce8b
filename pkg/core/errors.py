from pathlib import Path


class TrackcullError(Exception):
    """Base class for every error raised by trackcull services."""


class DataError(TrackcullError):
    """Input data (events, datasets, model files) is invalid or unreadable."""


class WireRangeError(DataError, ValueError):
    def __init__(self, value: float, upper: float):
        self.value = value
        super().__init__(f"average wire {value!r} outside [0, {upper}]")


class IncompleteEventError(DataError):
    def __init__(self, superlayer: int, event_id: int | None = None):
        self.superlayer = superlayer
        self.event_id = event_id
        where = f" in event {event_id}" if event_id is not None else ""
        super().__init__(f"incomplete event{where}: super-layer {superlayer} has no clusters")


class GenerationError(DataError):
    pass


class NoNegativeError(DataError):
    def __init__(self, event_id: int | None = None):
        self.event_id = event_id
        where = f" in event {event_id}" if event_id is not None else ""
        super().__init__(f"no negative candidate available{where}")


class DatasetIntegrityError(DataError):
    pass


class ParseError(DataError):
    def __init__(self, path: Path | str, line: int, reason: str):
        self.path = Path(path)
        self.line = line
        self.reason = reason
        super().__init__(f"{path}:{line}: {reason}")


class EventParseError(ParseError):
    pass


class DatasetParseError(ParseError):
    pass


class ModelFileError(DataError):
    pass


class ModelFormatError(ModelFileError):
    pass


class ModelVersionError(ModelFileError):
    pass


class ModelKindError(ModelFileError):
    pass


class ModelCorruptionError(ModelFileError):
    pass


class TrainingError(TrackcullError):
    pass


class NonFiniteLossError(TrainingError):
    def __init__(self, epoch: int, batch: int, lr: float):
        self.epoch = epoch
        self.batch = batch
        self.lr = lr
        super().__init__(f"non-finite training loss at epoch {epoch}, batch {batch}, lr {lr:.3g}")
