"""Exception hierarchy shared across the package.

CLI exit codes map onto these: ConfigError -> 2, NumericalError -> 3,
I/O problems (OSError / SnapshotFormatError) -> 4.
"""


class RavflowError(Exception):
    """Base class for all package errors."""


class InvalidFieldError(RavflowError, ValueError):
    """A field contains non-finite values or has the wrong shape."""


class GridMismatchError(RavflowError, ValueError):
    """Two fields that must share a grid do not."""


class UnsupportedModelError(RavflowError, ValueError):
    """An operation was called on a model that does not support it."""


class NumericalError(RavflowError):
    """Base class for runtime failures of a simulation."""


class DivergenceError(NumericalError):
    """A field became non-finite during time stepping."""

    def __init__(self, step: int, detail: str = ""):
        self.step = step
        msg = f"solution diverged at step {step}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class PositivityError(NumericalError):
    """The shifted energy E + C0 lost positivity; C0 is too small."""


class StartupHistoryError(RavflowError, ValueError):
    """A multistep scheme was invoked without the history it needs.

    Prime the state with the startup procedure (substepped second-order
    steps) before calling the BDF steppers.
    """


class ConfigError(RavflowError, ValueError):
    """A configuration file or CLI argument is invalid."""


class SnapshotFormatError(RavflowError, ValueError):
    """A field snapshot file is malformed."""
