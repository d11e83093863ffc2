import csv
import logging
from pathlib import Path
from typing import IO, Any, Dict, List, Optional, Union

from terranp.core.dataset import Frame
from terranp.core.task import AggregatedResult, MultiResult, Task
from terranp.model.training import TRAINING_LOG_HEADER, EpochSummary, StepRecord

logger = logging.getLogger(__name__)

TRAINING_LOG_NAME = "training_log.csv"


class BaseProcessor:
    """
    Ignores every event; processors that only care about a few of them
    subclass it and override those.
    """

    def task_started(self, task: Task) -> None:
        pass

    def task_completed(self, task: Task, result: AggregatedResult) -> None:
        pass

    def task_instance_started(self, task: Task, frame: Frame) -> None:
        pass

    def task_instance_completed(self, task: Task, frame: Frame, result: MultiResult) -> None:
        pass

    def subtask_instance_started(self, task: Task, frame: Frame) -> None:
        pass

    def subtask_instance_completed(self, task: Task, frame: Frame, result: MultiResult) -> None:
        pass

    def train_started(self, config: Dict[str, Any]) -> None:
        pass

    def step_completed(self, record: StepRecord) -> None:
        pass

    def epoch_completed(self, summary: EpochSummary) -> None:
        pass

    def train_completed(self, summaries: List[EpochSummary]) -> None:
        pass


class TrainingLogWriter(BaseProcessor):
    """
    Appends one ``epoch,step,elbo,nll_term,kl_term,lr`` row per optimizer
    step to ``training_log.csv`` under ``directory``. Rows are flushed as
    they come so a diverged run still leaves its log behind.
    """

    def __init__(self, directory: Union[str, Path]) -> None:
        self.path = Path(directory) / TRAINING_LOG_NAME
        self._file: Optional[IO[str]] = None
        self._writer: Any = None
        self.rows = 0

    def train_started(self, config: Dict[str, Any]) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._file = open(self.path, "w", newline="", encoding="utf-8")
        self._writer = csv.writer(self._file, lineterminator="\n")
        self._writer.writerow(TRAINING_LOG_HEADER)
        self.rows = 0

    def step_completed(self, record: StepRecord) -> None:
        if self._writer is None:
            return
        self._writer.writerow(record.row())
        self._file.flush()  # type: ignore
        self.rows += 1

    def train_completed(self, summaries: List[EpochSummary]) -> None:
        if self._file is not None:
            self._file.close()
            logger.info("wrote %d training steps to %s", self.rows, self.path)
        self._file = None
        self._writer = None


class LogProcessor(BaseProcessor):
    """Reports task progress and failed frames through ``logging``."""

    def task_started(self, task: Task) -> None:
        logger.debug("%s: started", task.name)

    def task_instance_completed(self, task: Task, frame: Frame, result: MultiResult) -> None:
        if result.failed:
            logger.warning("%s: %s failed: %s", task.name, frame.name, result[0].exception)
        else:
            logger.debug("%s: %s done", task.name, frame.name)

    def task_completed(self, task: Task, result: AggregatedResult) -> None:
        failed = sorted(result.failed_frames)
        logger.info(
            "%s: %d frames, %d failed%s",
            task.name,
            len(result),
            len(failed),
            f" ({', '.join(failed)})" if failed else "",
        )

    def epoch_completed(self, summary: EpochSummary) -> None:
        logger.info(
            "epoch %d done: %d steps, loss %.4f -> %.4f",
            summary.epoch,
            summary.steps,
            summary.first_loss,
            summary.last_loss,
        )
