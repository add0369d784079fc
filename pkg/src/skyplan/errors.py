"""Exception hierarchy shared by all skyplan modules.

Two failure families matter to callers: domain/validation problems
(bad values, bad geometry, infeasible requests) and input problems
(missing or unreadable files).  The CLI maps them to exit codes 1 and 2.
"""


class SkyplanError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(SkyplanError):
    """A value, file content, or request violates a domain contract."""


class InputError(SkyplanError):
    """A required input file is missing or unreadable."""


class GeometryError(ValidationError):
    """Degenerate link geometry (zero-length or non-airborne link)."""


class TrainingDivergenceError(ValidationError):
    """Network parameters became non-finite during training."""

    def __init__(self, epoch: int):
        super().__init__(f"training diverged: non-finite parameter at epoch {epoch}")
        self.epoch = epoch


class InsufficientHistoryError(ValidationError):
    """Not enough days of traffic history to build training windows."""
