"""Exception hierarchy for repda.

Every error raised by the library derives from ``RepdaError`` so the CLI can
map the whole family to exit code 2 with a single ``except`` clause.
"""

from pathlib import Path
from typing import Optional


class RepdaError(Exception):
    """Base class for all repda errors."""


class ValidationError(RepdaError, ValueError):
    """An invariant or precondition on an input does not hold."""


class EmptyDatasetError(ValidationError):
    """A dataset, sample list or class has no elements where one is required."""


class DimensionMismatchError(ValidationError):
    """Input dimensions disagree (weights vs. inputs, sizes vs. sources, ...)."""


class EvaluationError(RepdaError):
    """A function produced a non-finite value where a finite one is required."""


class SingularSystemError(RepdaError):
    """The weighted normal equations are singular."""

    def __init__(self, rank: int, size: int):
        super().__init__(
            f"Normal system is singular (rank {rank} < {size}); "
            "pass ridge > 0 to regularize the solve"
        )
        self.rank = rank
        self.size = size


class CapacityError(RepdaError):
    """An exact enumeration would exceed its configured capacity."""

    def __init__(self, what: str, required: int, limit: int, unit: str = "configurations"):
        super().__init__(
            f"{what} needs {required} {unit} (limit {limit}); "
            "use a smaller instance"
        )
        self.required = required
        self.limit = limit


class ContractError(RepdaError):
    """A bound-specific restriction (for example optimal weights) is violated."""


class UnsupportedLossError(RepdaError):
    """The requested operation is not defined for the supplied loss."""


class ConfigError(RepdaError):
    """A configuration document is malformed or inconsistent."""


class ReportWriteError(RepdaError):
    """Writing an output artifact failed."""

    def __init__(self, path: Path, cause: Optional[BaseException] = None):
        message = f"Could not write {path}"
        if cause is not None:
            message += f": {cause}"
        super().__init__(message)
        self.path = path
