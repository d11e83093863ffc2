from typing import TYPE_CHECKING, Dict

if TYPE_CHECKING:
    from terranp.core.task import AggregatedResult, MultiResult, Result, Task  # noqa

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class TerraNPError(Exception):
    """
    Superclass for every error raised by terranp. ``exit_code`` is what the
    command line returns when the error escapes a command.
    """

    exit_code = EXIT_USAGE


class ConfigurationError(TerraNPError):
    """
    Raised when a configuration key is unknown or a value breaks a section invariant
    """

    exit_code = EXIT_USAGE


class UsageError(TerraNPError):
    """
    Raised when a command is invoked with arguments that make no sense,
    i.e. ``generate --scenes 0``
    """

    exit_code = EXIT_USAGE


class DataError(TerraNPError):
    """
    Raised when a dataset, grid CSV or checkpoint can't be read or written,
    or its content doesn't match what the caller expects
    """

    exit_code = EXIT_DATA


class NumericError(TerraNPError, ArithmeticError):
    """
    Superclass for numerical failures
    """

    exit_code = EXIT_NUMERIC


class NonFiniteError(NumericError):
    """
    Raised when an operation produces NaN or Inf
    """

    pass


class FactorizationError(NumericError):
    """
    Raised when a Gram matrix stays indefinite after the maximum jitter
    """

    pass


class ShapeError(TerraNPError, ValueError):
    """
    Raised when operands have shapes that don't conform
    """

    pass


class UnknownOpError(TerraNPError, KeyError):
    """
    Raised when asking for a primitive that doesn't exist
    """

    pass


class DetachedGraphError(TerraNPError):
    """
    Raised when differentiating something that wasn't recorded on the tape
    """

    pass


class EmptySetError(TerraNPError, ValueError):
    """
    Raised when an operation needs at least one point and got none
    """

    exit_code = EXIT_DATA


class PluginAlreadyRegistered(TerraNPError):
    """
    Raised when trying to register an already registered plugin
    """

    pass


class PluginNotRegistered(TerraNPError):
    """
    Raised when trying to access a plugin that is not registered
    """

    pass


class TerraNPExecutionError(TerraNPError):
    """
    Raised by :meth:`terranp.core.TerraNP.run` when any of the frames fail
    and ``raise_on_error`` is set.
    """

    def __init__(self, result: "AggregatedResult") -> None:
        self.result = result

    @property
    def failed_frames(self) -> Dict[str, "MultiResult"]:
        """
        Frames that failed to complete the task
        """
        return {k: v for k, v in self.result.items() if v.failed}

    @property
    def exit_code(self) -> int:  # type: ignore[override]
        codes = [
            getattr(r.exception, "exit_code", EXIT_USAGE)
            for r in self.failed_frames.values()
        ]
        return max(codes) if codes else EXIT_USAGE

    def __str__(self) -> str:
        text = "\n"
        for k, r in self.result.items():
            text += "{}\n".format("#" * 40)
            if r.failed:
                text += "# {} (failed)\n".format(k)
            else:
                text += "# {} (succeeded)\n".format(k)
            text += "{}\n".format("#" * 40)
            for sub_r in r:
                text += "**** {}\n".format(sub_r.name)
                text += "{}\n".format(sub_r)
        return text


class TerraNPSubTaskError(TerraNPError):
    """
    Raised by terranp when a sub task managed by :meth:`terranp.core.task.Task.run` has failed
    """

    def __init__(self, task: "Task", result: "MultiResult"):
        self.task = task
        self.result = result

    def __str__(self) -> str:
        return "Subtask: {} (failed)\n".format(self.task)


class ConflictingConfigurationWarning(UserWarning):
    pass
