import logging
from typing import Any, Callable, Dict, List, Optional

from terranp.core.configuration import Config
from terranp.core.dataset import Dataset, Frame
from terranp.core.plugins.runners import RunnerPlugin
from terranp.core.processor import Processor, Processors
from terranp.core.state import GlobalState
from terranp.core.task import AggregatedResult, Task

logger = logging.getLogger(__name__)


class TerraNP(object):
    """
    This is the main object to work with. It contains the dataset and it serves
    as task dispatcher over its frames.

    Arguments:
        dataset (:obj:`terranp.core.dataset.Dataset`): frames to work with
        config (:obj:`terranp.core.configuration.Config`): Configuration object
        data(GlobalState): shared data amongst different iterations of terranp
        processors (:obj:`terranp.core.processor.Processors`): event receivers
        runner: runner plugin executing the tasks

    Attributes:
        dataset (:obj:`terranp.core.dataset.Dataset`): frames to work with
        data(:obj:`terranp.core.state.GlobalState`): shared data amongst different iterations
        config (:obj:`terranp.core.configuration.Config`): Configuration parameters
    """

    def __init__(
        self,
        dataset: Dataset,
        config: Optional[Config] = None,
        data: Optional[GlobalState] = None,
        processors: Optional[Processors] = None,
        runner: Optional[RunnerPlugin] = None,
    ) -> None:
        self.data = data if data is not None else GlobalState()
        self.dataset = dataset
        self.config = config or Config()
        self.processors = processors or Processors()
        self.runner = runner

    def __repr__(self) -> str:
        return f"TerraNP({self.dataset!r}, runner={type(self.runner).__name__})"

    def with_processors(self, processors: List[Processor]) -> "TerraNP":
        """
        Given a list of Processor objects return a copy of the terranp object with the processors
        assigned to the copy. The original object is left unmodified.
        """
        return TerraNP(**{**self.__dict__, **{"processors": Processors(processors)}})

    def with_runner(self, runner: RunnerPlugin) -> "TerraNP":
        """
        Given a runner return a copy of the terranp object with the runner
        assigned to the copy. The original object is left unmodified.
        """
        return TerraNP(**{**self.__dict__, **{"runner": runner}})

    def filter(self, filter_func: Callable[..., bool], **kwargs: Any) -> "TerraNP":
        """
        See :py:meth:`terranp.core.dataset.Dataset.filter`

        Returns:
            :obj:`TerraNP`: A new object with same configuration as ``self`` but filtered dataset.
        """
        b = TerraNP(**self.__dict__)
        b.dataset = self.dataset.filter(filter_func, **kwargs)
        return b

    def run(
        self,
        task: Callable[..., Any],
        raise_on_error: Optional[bool] = None,
        on_good: bool = True,
        on_failed: bool = False,
        name: Optional[str] = None,
        **kwargs: Any,
    ) -> AggregatedResult:
        """
        Run task over all the frames in the dataset.

        Arguments:
            task (``callable``): function or callable that will be run against each frame
            raise_on_error (``bool``): raise instead of recording failed frames
            on_good(``bool``): Whether to run or not this task on frames marked as good
            on_failed(``bool``): Whether to run or not this task on frames marked as failed
            **kwargs: additional argument to pass to ``task`` when calling it

        Raises:
            :obj:`terranp.core.exceptions.TerraNPExecutionError`: if at least a task fails
              and ``raise_on_error`` is set

        Returns:
            :obj:`terranp.core.task.AggregatedResult`: results of each execution, in frame order
        """
        t = Task(task, self, name=name, processors=self.processors, **kwargs)
        self.processors.task_started(t)

        run_on: List[Frame] = []
        frames = self.dataset.frames
        if on_good:
            run_on.extend(f for f in frames if f.name not in self.data.failed_frames)
        if on_failed:
            run_on.extend(f for f in frames if f.name in self.data.failed_frames)

        if run_on:
            logger.info("Running task %r on %d frames", t.name, len(run_on))
        else:
            logger.warning("Task %r has not been run, 0 frames selected", t.name)

        if self.runner is None:
            from terranp.plugins.runners import SerialRunner

            self.runner = SerialRunner()
        result = self.runner.run(t, run_on)

        if raise_on_error:
            result.raise_on_error()
        else:
            self.data.failed_frames.update(result.failed_frames.keys())

        self.processors.task_completed(t, result)

        return result

    def dict(self) -> Dict[str, Any]:
        """Return a dictionary representing the object."""
        return {"data": self.data.dict(), "dataset": self.dataset.dict()}
