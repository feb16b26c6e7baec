"""Error taxonomy shared by the library and the command line.

Library code raises these; ``swformer.cli.main`` maps each kind to its exit
code and prints one JSON line on stderr.
"""

from pathlib import Path
from typing import Iterable, Optional, Union


class SWFormerError(Exception):
    """Base class for every error the package raises on purpose."""

    exit_code = 1
    kind = "error"

    def to_record(self) -> dict:
        """Machine-parsable summary used by the CLI."""
        return {"error": self.kind, "exit_code": self.exit_code, "message": str(self)}


class ConfigError(SWFormerError):
    """Invalid configuration key, value or parameter range."""

    exit_code = 2
    kind = "config"


class InputNotFoundError(SWFormerError, FileNotFoundError):
    """A required input file or directory does not exist."""

    exit_code = 3
    kind = "input_not_found"

    def __init__(self, path: Union[str, Path], what: str = "input"):
        self.path = Path(path)
        super().__init__(f"{what} not found: {self.path}")


class IngestionError(SWFormerError):
    """Paired folders do not line up."""

    exit_code = 3
    kind = "ingestion"

    def __init__(self, message: str, orphans: Iterable[str] = ()):
        self.orphans = sorted(orphans)
        if self.orphans:
            message = f"{message}: {', '.join(self.orphans)}"
        super().__init__(message)


class TrainingAborted(SWFormerError):
    """Loss or gradient became non-finite."""

    exit_code = 4
    kind = "training_aborted"

    def __init__(self, message: str, step: Optional[int] = None, parameter: Optional[str] = None):
        self.step = step
        self.parameter = parameter
        super().__init__(message)


class DimensionError(SWFormerError, ValueError):
    """Tensor shapes disagree; the message names the offending axes."""

    exit_code = 5
    kind = "dimension"


class UsageError(SWFormerError):
    """An API was called outside its contract."""

    exit_code = 5
    kind = "usage"


class GradCheckFailed(SWFormerError):
    """Tape gradients disagree with finite differences."""

    exit_code = 6
    kind = "gradcheck_failed"


class CheckpointError(SWFormerError):
    """Checkpoint could not be written, read or decoded."""

    exit_code = 7
    kind = "checkpoint"

    def __init__(self, path: Union[str, Path], reason: str):
        self.path = Path(path)
        self.reason = reason
        super().__init__(f"{self.path}: {reason}")
