from typing import TYPE_CHECKING, Any, Dict, List, Protocol

from terranp.core.dataset import Frame
from terranp.core.task import AggregatedResult, MultiResult, Task

if TYPE_CHECKING:
    from terranp.model.training import EpochSummary, StepRecord


class Processor(Protocol):
    """
    Receiver of run events. It's not necessary to subclass it, any object
    with these methods will do; :obj:`terranp.plugins.processors.BaseProcessor`
    ignores every event so you only override the ones you need.

    Task events come from :meth:`terranp.core.TerraNP.run`. With the threaded
    runner the per-frame events arrive from worker threads, so processors
    that keep state have to guard it.

    Training events come from :func:`terranp.model.training.train`, always
    from the calling thread.
    """

    def task_started(self, task: Task) -> None:
        """Before the first frame."""
        ...

    def task_completed(self, task: Task, result: AggregatedResult) -> None:
        """After the last frame, with every frame's results."""
        ...

    def task_instance_started(self, task: Task, frame: Frame) -> None:
        """Before ``task`` runs on ``frame``."""
        ...

    def task_instance_completed(self, task: Task, frame: Frame, result: MultiResult) -> None:
        """After ``task`` ran on ``frame``, whether it failed or not."""
        ...

    def subtask_instance_started(self, task: Task, frame: Frame) -> None:
        ...

    def subtask_instance_completed(self, task: Task, frame: Frame, result: MultiResult) -> None:
        ...

    def train_started(self, config: Dict[str, Any]) -> None:
        """Before the first step, with the resolved configuration as a dict."""
        ...

    def step_completed(self, record: "StepRecord") -> None:
        """After every optimizer step."""
        ...

    def epoch_completed(self, summary: "EpochSummary") -> None:
        ...

    def train_completed(self, summaries: List["EpochSummary"]) -> None:
        """When training stops, also when it stops on a numeric error."""
        ...


class Processors(List[Processor]):
    """
    A list of :obj:`Processor` that is itself a processor: every event is
    forwarded to each member, in order.
    """

    def _emit(self, event: str, *args: Any) -> None:
        for p in self:
            getattr(p, event)(*args)

    def task_started(self, task: Task) -> None:
        self._emit("task_started", task)

    def task_completed(self, task: Task, result: AggregatedResult) -> None:
        self._emit("task_completed", task, result)

    def task_instance_started(self, task: Task, frame: Frame) -> None:
        self._emit("task_instance_started", task, frame)

    def task_instance_completed(self, task: Task, frame: Frame, result: MultiResult) -> None:
        self._emit("task_instance_completed", task, frame, result)

    def subtask_instance_started(self, task: Task, frame: Frame) -> None:
        self._emit("subtask_instance_started", task, frame)

    def subtask_instance_completed(self, task: Task, frame: Frame, result: MultiResult) -> None:
        self._emit("subtask_instance_completed", task, frame, result)

    def train_started(self, config: Dict[str, Any]) -> None:
        self._emit("train_started", config)

    def step_completed(self, record: "StepRecord") -> None:
        self._emit("step_completed", record)

    def epoch_completed(self, summary: "EpochSummary") -> None:
        self._emit("epoch_completed", summary)

    def train_completed(self, summaries: List["EpochSummary"]) -> None:
        self._emit("train_completed", summaries)
