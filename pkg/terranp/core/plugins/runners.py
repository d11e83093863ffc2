from typing import Any, List, Protocol, Type

from terranp.core.dataset import Frame
from terranp.core.plugins.register import PluginRegister
from terranp.core.task import AggregatedResult, Task

RUNNERS_PLUGIN_PATH = "terranp.plugins.runners"


class RunnerPlugin(Protocol):
    def __init__(self, *args: Any, **kwargs: Any) -> None:
        """
        This method configures the plugin
        """
        raise NotImplementedError("needs to be implemented by the plugin")

    def run(self, task: Task, frames: List[Frame]) -> AggregatedResult:
        """
        This method runs the given task over all the frames. The result must
        keep the order of ``frames``.
        """
        raise NotImplementedError("needs to be implemented by the plugin")


RunnersPluginRegister: PluginRegister[Type[RunnerPlugin]] = PluginRegister(
    RUNNERS_PLUGIN_PATH,
    builtins={
        "serial": "terranp.plugins.runners:SerialRunner",
        "threaded": "terranp.plugins.runners:ThreadedRunner",
    },
)
