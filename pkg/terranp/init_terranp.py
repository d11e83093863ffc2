from pathlib import Path
from typing import Any, Optional, Union

from terranp.core import TerraNP  # noqa: I001  (must load before terranp.bev: import cycle)
from terranp.bev.grid import GridSpec
from terranp.core.configuration import Config
from terranp.core.dataset import Dataset
from terranp.core.plugins.baselines import BaselinePlugin, BaselinesPluginRegister
from terranp.core.plugins.runners import RunnerPlugin, RunnersPluginRegister
from terranp.core.state import GlobalState
from terranp.world.scenes import read_dataset


def load_dataset(path: Union[str, Path]) -> Dataset:
    return read_dataset(path)


def load_runner(
    config: Config,
) -> RunnerPlugin:
    RunnersPluginRegister.auto_register()
    runner_plugin = RunnersPluginRegister.get_plugin(config.runner.plugin)
    runner = runner_plugin(**config.runner.options)
    return runner


def load_baseline(
    name: str,
    config: Config,
) -> BaselinePlugin:
    """Instantiates the baseline plugin ``name`` with the settings of ``config``."""
    BaselinesPluginRegister.auto_register()
    baseline_plugin = BaselinesPluginRegister.get_plugin(name)
    options = {"sigma_min": config.model.sigma_min}
    if name == "gp":
        options.update(max_context=config.eval.gp_max_context, seed=config.train.seed)
    return baseline_plugin(**options)


def InitTerraNP(
    config_file: str = "",
    data_file: str = "",
    dataset: Optional[Dataset] = None,
    **kwargs: Any,
) -> TerraNP:
    """
    Arguments:
        config_file(str): Path to the configuration file (optional)
        data_file(str): SCN1 dataset to load (optional)
        dataset: dataset already in memory, takes precedence over ``data_file``
        **kwargs: Extra information to pass to the
            :obj:`terranp.core.configuration.Config` object

    Returns:
        :obj:`terranp.core.TerraNP`: fully instantiated and configured
    """
    if config_file:
        config = Config.from_file(config_file, **kwargs)
    else:
        config = Config.from_dict(**kwargs)

    config.logging.configure()

    if dataset is None:
        if data_file:
            dataset = load_dataset(data_file)
        else:
            dataset = Dataset(GridSpec.from_config(config.grid), config.semantics.feature_dim)

    return TerraNP(
        dataset=dataset,
        runner=load_runner(config),
        config=config,
        data=GlobalState(),
    )
