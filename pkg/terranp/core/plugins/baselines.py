from typing import Any, Protocol, Type

import numpy as np

from terranp.core.plugins.register import PluginRegister
from terranp.model.scnp import PredictiveField

BASELINES_PLUGIN_PATH = "terranp.plugins.baselines"


class BaselinePlugin(Protocol):
    def __init__(self, *args: Any, **kwargs: Any) -> None:
        """
        This method configures the plugin
        """
        raise NotImplementedError("needs to be implemented by the plugin")

    def predict(
        self, context_coords: np.ndarray, context_heights: np.ndarray, target_coords: np.ndarray
    ) -> PredictiveField:
        """
        This method predicts a Gaussian height at every target from the
        context heights alone
        """
        raise NotImplementedError("needs to be implemented by the plugin")


BaselinesPluginRegister: PluginRegister[Type[BaselinePlugin]] = PluginRegister(
    BASELINES_PLUGIN_PATH,
    builtins={
        "gp": "terranp.plugins.baselines.gp:GPBaseline",
        "nearest": "terranp.plugins.baselines.nearest:NearestContextBaseline",
    },
)
