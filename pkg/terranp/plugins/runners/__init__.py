import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List

from terranp.core.dataset import Frame
from terranp.core.exceptions import ConfigurationError
from terranp.core.task import AggregatedResult, Task

logger = logging.getLogger(__name__)


class SerialRunner:
    """Runs the task on one frame after the other, in the calling thread."""

    def run(self, task: Task, frames: List[Frame]) -> AggregatedResult:
        result = AggregatedResult(task.name)
        for frame in frames:
            result[frame.name] = task.copy().start(frame)
        return result


class ThreadedRunner:
    """
    Runs the task on a pool of threads, one frame per job. The model is
    shared read-only between threads and the heavy numpy kernels release
    the GIL. Results keep the frame order whatever order frames finish in.

    Arguments:
        num_workers: number of threads to use
    """

    def __init__(self, num_workers: int = 4) -> None:
        if num_workers < 1:
            raise ConfigurationError(f"num_workers must be positive, got {num_workers}")
        self.num_workers = num_workers

    def __repr__(self) -> str:
        return f"ThreadedRunner(num_workers={self.num_workers})"

    def run(self, task: Task, frames: List[Frame]) -> AggregatedResult:
        workers = max(1, min(self.num_workers, len(frames)))
        logger.debug("%s: %d frames on %d threads", task.name, len(frames), workers)
        with ThreadPoolExecutor(workers, thread_name_prefix="terranp-frame") as pool:
            done = pool.map(lambda f: task.copy().start(f), frames)
            return AggregatedResult(
                task.name, **{f.name: r for f, r in zip(frames, done)}
            )
