import logging
import time
import traceback
from typing import TYPE_CHECKING, Any, Callable, Dict, List, Optional

import numpy as np

from terranp.core.exceptions import TerraNPExecutionError, TerraNPSubTaskError

if TYPE_CHECKING:
    from terranp.core import TerraNP
    from terranp.core.dataset import Frame
    from terranp.core.processor import Processors


logger = logging.getLogger(__name__)


class Task(object):
    """
    A task wraps a function that has to be run against every frame of a
    dataset. :meth:`terranp.core.TerraNP.run` creates it for you.

    The function is called as ``task(task_object, **params)`` and may return
    a :obj:`Result` or any plain value, which gets wrapped in one.

    Arguments:
        task (callable): function or callable we will be calling
        terranp (:obj:`terranp.core.TerraNP`): object the task runs on
        processors (:obj:`terranp.core.processor.Processors`): event receivers
        name (``string``): name of task, defaults to ``task.__name__``
        parent_task (:obj:`Task`): set when this is a subtask
        **kwargs: Parameters that will be passed to the ``task``

    Attributes:
        params: Parameters that will be passed to the ``task``.
        results (:obj:`terranp.core.task.MultiResult`): Intermediate results
        frame (:obj:`terranp.core.dataset.Frame`): Frame we are operating on.
          Populated right before calling the ``task``
    """

    def __init__(
        self,
        task: Callable[..., Any],
        terranp: "TerraNP",
        processors: "Processors",
        name: Optional[str] = None,
        parent_task: Optional["Task"] = None,
        **kwargs: Any,
    ) -> None:
        self.task = task
        self.terranp = terranp
        self.processors = processors
        self.name = name or task.__name__
        self.parent_task = parent_task
        self.params = kwargs
        self.results = MultiResult(self.name)
        self.frame: Optional["Frame"] = None

    def __repr__(self) -> str:
        return self.name

    @property
    def is_subtask(self) -> bool:
        return self.parent_task is not None

    def copy(self) -> "Task":
        """A fresh task with the same function and parameters, for another frame."""
        return Task(
            self.task,
            self.terranp,
            self.processors,
            name=self.name,
            parent_task=self.parent_task,
            **self.params,
        )

    def _failure(self, frame: "Frame", exc: Exception) -> "Result":
        tb = traceback.format_exc()
        logger.error("%s: task %r failed with traceback:\n%s", frame.name, self.name, tb)
        # a failed subtask already logged its own traceback
        payload = str(exc) if isinstance(exc, TerraNPSubTaskError) else tb
        return Result(frame, result=payload, failed=True, exception=exc)

    def start(self, frame: "Frame") -> "MultiResult":
        """
        Runs the task for ``frame``. Exceptions are caught and recorded as a
        failed :obj:`Result`, they never escape.

        Returns:
            :obj:`terranp.core.task.MultiResult`: this task's result first,
            then the results of its subtasks in the order they ran
        """
        self.frame = frame
        if self.is_subtask:
            self.processors.subtask_instance_started(self, frame)
        else:
            self.processors.task_instance_started(self, frame)

        t0 = time.perf_counter()
        try:
            out = self.task(self, **self.params)
            r = out if isinstance(out, Result) else Result(frame, result=out)
        except Exception as e:
            r = self._failure(frame, e)
        r.name = self.name
        r.elapsed = time.perf_counter() - t0
        logger.debug("%s: %s took %.3fs", frame.name, self.name, r.elapsed)
        self.results.insert(0, r)

        if self.is_subtask:
            self.processors.subtask_instance_completed(self, frame, self.results)
        else:
            self.processors.task_instance_completed(self, frame, self.results)
        return self.results

    def run(self, task: Callable[..., Any], **kwargs: Any) -> "MultiResult":
        """
        Calls a task from within a task, for the frame of the current
        thread. Frame evaluation runs the model and the baseline this way::

            def evaluate(task):
                task.run(predict_frame, model=model)
                task.run(predict_baseline, baseline=gp)

            terranp.run(evaluate)

        Raises:
            :obj:`terranp.core.exceptions.TerraNPSubTaskError`: the subtask
              failed; its results are still appended to ``self.results``
        """
        if self.frame is None:
            raise TerraNPSubTaskError(task=self, result=MultiResult(self.name))

        sub = Task(task, self.terranp, self.processors, parent_task=self, **kwargs)
        r = sub.start(self.frame)
        self.results.append(r[0] if len(r) == 1 else r)  # type: ignore[arg-type]
        if r.failed:
            raise TerraNPSubTaskError(task=sub, result=r)
        return r


class Result(object):
    """
    Outcome of one task on one frame.

    Arguments:
        frame (:obj:`terranp.core.dataset.Frame`): frame that lead to this result
        result (obj): what the task returned
        failed (bool): Whether the execution failed or not
        exception (Exception): uncaught exception thrown during the execution of the task (if any)
        cells (np.ndarray): flat indices of the grid cells ``result`` refers to, for
          predictions

    Attributes:
        name (str): name of the task, set once it finished
        elapsed (float): wall time of the task and its subtasks, seconds
    """

    __slots__ = ("frame", "result", "failed", "exception", "cells", "name", "elapsed")

    def __init__(
        self,
        frame: Optional["Frame"],
        result: Any = None,
        failed: bool = False,
        exception: Optional[BaseException] = None,
        cells: Optional[np.ndarray] = None,
    ) -> None:
        self.frame = frame
        self.result = result
        self.failed = failed
        self.exception = exception
        self.cells = cells
        self.name: Optional[str] = None
        self.elapsed = 0.0

    def __repr__(self) -> str:
        state = "failed" if self.failed else "ok"
        return f'{self.__class__.__name__}: "{self.name}" ({state})'

    def __str__(self) -> str:
        return str(self.exception if self.exception else self.result)


class MultiResult(List[Result]):
    """
    The results of a task and all its subtasks for one frame. Attribute
    access falls through to the first result, the task's own.
    """

    def __init__(self, name: str) -> None:
        super().__init__()
        self.name = name

    def __getattr__(self, name: str) -> Any:
        return getattr(self[0], name)

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}: {super().__repr__()}"

    @property
    def failed(self) -> bool:
        """If ``True`` at least a task failed."""
        return any(r.failed for r in self)


class AggregatedResult(Dict[str, MultiResult]):
    """
    The results of every frame, keyed by frame name in dataset order.
    """

    def __init__(self, name: str, **kwargs: MultiResult) -> None:
        super().__init__(**kwargs)
        self.name = name

    def __repr__(self) -> str:
        return f"{self.__class__.__name__} ({self.name}): {super().__repr__()}"

    @property
    def failed(self) -> bool:
        """If ``True`` at least a frame failed."""
        return any(r.failed for r in self.values())

    @property
    def failed_frames(self) -> Dict[str, MultiResult]:
        """Frames that failed during the execution of the task."""
        return {f: r for f, r in self.items() if r.failed}

    def results(self) -> List[Any]:
        """The ``result`` of the top-level task of every frame, in order."""
        return [r[0].result for r in self.values()]

    def elapsed(self) -> Dict[str, float]:
        """Wall time of the top-level task per frame, seconds."""
        return {f: r[0].elapsed for f, r in self.items()}

    def raise_on_error(self) -> None:
        """
        Raises:
            :obj:`terranp.core.exceptions.TerraNPExecutionError`: When at least a task failed
        """
        if self.failed:
            raise TerraNPExecutionError(self)
