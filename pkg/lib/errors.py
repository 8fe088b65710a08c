"""
Exception hierarchy shared by the library and the CLI.
"""
from __future__ import annotations

from typing import Optional, Sequence


class MMAEError(Exception):
    """Base class for every error raised by lib."""


class ShapeMismatchError(MMAEError, ValueError):
    def __init__(self, what: str, left: Sequence[int], right: Sequence[int]):
        self.left = tuple(left)
        self.right = tuple(right)
        super().__init__(f"{what}: shape {self.left} does not match {self.right}")


class DomainError(MMAEError, ValueError):
    pass


class ConfigError(MMAEError, ValueError):
    def __init__(self, problems: Sequence[str] | str):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class TrainingDivergedError(MMAEError, RuntimeError):
    def __init__(self, epoch: int, batch: int, value: float, context: Optional[str] = None):
        self.epoch = epoch
        self.batch = batch
        self.value = value
        self.context = context
        where = f"epoch {epoch}, batch {batch}"
        if context:
            where = f"{context}: {where}"
        super().__init__(f"non-finite objective ({value}) at {where}")

    def tagged(self, context: str) -> "TrainingDivergedError":
        """Return a copy with `context` prepended, e.g. the layer or config."""
        tag = context if not self.context else f"{context}, {self.context}"
        return TrainingDivergedError(self.epoch, self.batch, self.value, tag)


class DataError(MMAEError):
    pass


class FormatError(MMAEError):
    pass


class VersionError(FormatError):
    pass


class TruncatedError(FormatError):
    pass


class ChecksumError(FormatError):
    pass


class FingerprintMismatchError(FormatError):
    pass


class UntrainedModelError(MMAEError):
    pass


class NotFittedError(MMAEError):
    pass
