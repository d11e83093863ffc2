"""
Per-frame tasks run through :meth:`terranp.core.TerraNP.run`. Frame
evaluation runs the model prediction and, when asked, a baseline prediction
as subtasks so processors see each of them.
"""
import logging
from typing import Mapping, Optional

import numpy as np

from terranp.core.configuration import ModelConfig
from terranp.core.exceptions import TerraNPSubTaskError
from terranp.core.plugins.baselines import BaselinePlugin
from terranp.core.task import Result, Task
from terranp.metrics.report import EvalReport, evaluate_field
from terranp.model.sampling import sample_context_target
from terranp.model.scnp import PredictiveField, SemanticNP
from terranp.pipeline import FrameInputs, frame_sets

logger = logging.getLogger(__name__)


def frame_seed(seed: int, scene: int, index: int) -> int:
    """Independent, reproducible seed for every frame of a run."""
    return int(np.random.SeedSequence([seed, scene, index]).generate_state(1)[0])


class FrameEvaluation(object):
    """
    Everything ``eval`` keeps about one frame.

    Attributes:
        name (str): frame name
        mean (np.ndarray): (H, W) predicted heights, NaN where nothing was predicted
        std (np.ndarray): (H, W) predicted σ, NaN where nothing was predicted
        samples (list): (H, W) mean field per latent draw
        report (EvalReport): model metrics
        baseline (EvalReport): baseline metrics, if a baseline ran and succeeded
    """

    __slots__ = ("name", "mean", "std", "samples", "report", "baseline")

    def __init__(
        self,
        name: str,
        mean: np.ndarray,
        std: np.ndarray,
        samples: list,
        report: EvalReport,
        baseline: Optional[EvalReport] = None,
    ) -> None:
        self.name = name
        self.mean = mean
        self.std = std
        self.samples = samples
        self.report = report
        self.baseline = baseline

    def __repr__(self) -> str:
        return f"FrameEvaluation({self.name}, {self.report!r})"


def predict_frame(
    task: Task, model: SemanticNP, inputs: FrameInputs, samples: int = 1, seed: int = 0
) -> Result:
    """
    Conditions ``model`` on every observed cell and predicts every GT-valid
    cell. The result is a :obj:`PredictiveField`; the predicted cells are in
    the ``cells`` attribute of the result.
    """
    sample = sample_context_target(inputs.context, inputs.gt, model.config, training=False)
    context, targets, _ = frame_sets(model, inputs, sample)
    field = model.predict(context, targets, n_samples=samples, seed=seed, keep_samples=True)
    return Result(task.frame, result=field, cells=sample.target_cells)


def predict_baseline(
    task: Task, baseline: BaselinePlugin, inputs: FrameInputs, config: ModelConfig
) -> Result:
    """Same cells as :func:`predict_frame`, heights only."""
    sample = sample_context_target(inputs.context, inputs.gt, config, training=False)
    field = baseline.predict(
        inputs.coords(sample.context_cells),
        sample.context_heights,
        inputs.coords(sample.target_cells),
    )
    return Result(task.frame, result=field, cells=sample.target_cells)


def _grids(field: PredictiveField, cells: np.ndarray, inputs: FrameInputs):  # type: ignore
    mean, std = field.to_grid(cells, inputs.spec)
    samples = []
    for s in field.samples:
        grid = np.full(inputs.spec.size, np.nan)
        grid[cells] = s
        samples.append(grid.reshape(inputs.spec.shape))
    return mean, std, samples


def evaluate_frame(
    task: Task,
    model: SemanticNP,
    inputs: Mapping[str, FrameInputs],
    samples: int = 1,
    seed: int = 0,
    n_bins: int = 10,
    baseline: Optional[BaselinePlugin] = None,
    baseline_name: str = "",
) -> Result:
    """
    Predicts and scores one frame. A failing baseline is logged and left
    out of the result; a failing model prediction fails the frame.
    """
    frame = task.frame
    assert frame is not None
    fi = inputs[frame.name]
    spec = fi.spec

    r = task.run(
        predict_frame,
        name="predict_frame",
        model=model,
        inputs=fi,
        samples=samples,
        seed=frame_seed(seed, frame.scene, frame.index),
    )
    mean, std, sample_grids = _grids(r[0].result, r[0].cells, fi)
    report = evaluate_field(mean, std, fi.gt, fi.observed, spec, frame.name, n_bins)

    baseline_report = None
    if baseline is not None:
        try:
            b = task.run(
                predict_baseline,
                name=f"predict_{baseline_name}",
                baseline=baseline,
                inputs=fi,
                config=model.config,
            )
        except TerraNPSubTaskError as e:
            logger.warning(
                "%s: baseline %s failed: %s", frame.name, baseline_name, e.result[0].exception
            )
            # the frame itself still succeeded
            task.results.remove(e.result[0])
        else:
            b_mean, b_std = b[0].result.to_grid(b[0].cells, spec)
            baseline_report = evaluate_field(
                b_mean, b_std, fi.gt, fi.observed, spec, frame.name, n_bins
            )

    logger.debug("%s: %r", frame.name, report)
    return Result(
        frame, result=FrameEvaluation(frame.name, mean, std, sample_grids, report, baseline_report)
    )
