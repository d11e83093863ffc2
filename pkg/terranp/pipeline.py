"""
Turns recorded frames into what the model consumes: the context height grid
(from the current or the aggregated LiDAR scans), the semantic grid (raw or
Bayes-fused over time), the observed mask of the current scan and the ground
truth.
"""
import logging
from typing import Iterator, List, Optional, Set, Tuple

import numpy as np

from terranp.autodiff.tensor import Tensor
from terranp.bev.grid import ElevationGrid, GridSpec, PointSet, bin_min_height, world_to_ego
from terranp.core.configuration import TrainConfig
from terranp.core.dataset import Dataset, Frame
from terranp.fusion.belief import BeliefGrid, bayes_update, warp_belief
from terranp.fusion.lidar import aggregate_lidar
from terranp.model.sampling import CellSample
from terranp.model.scnp import ContextSet, SemanticNP, TargetSet

logger = logging.getLogger(__name__)


class FrameInputs(object):
    """
    Attributes:
        frame (Frame): source frame
        spec (GridSpec): grid of every raster below
        context (ElevationGrid): min-binned heights of the current or aggregated scans
        observed (np.ndarray): (H, W) cells hit by the current scan
        semantics (np.ndarray): (D_f, H, W) features fed to the fusion network
        gt (ElevationGrid): ground truth
    """

    __slots__ = ("frame", "spec", "context", "observed", "semantics", "gt")

    def __init__(
        self,
        frame: Frame,
        spec: GridSpec,
        context: ElevationGrid,
        observed: np.ndarray,
        semantics: np.ndarray,
        gt: ElevationGrid,
    ) -> None:
        self.frame = frame
        self.spec = spec
        self.context = context
        self.observed = observed
        self.semantics = semantics
        self.gt = gt

    @property
    def name(self) -> str:
        return self.frame.name

    def __repr__(self) -> str:
        return f"FrameInputs({self.name}, observed={int(self.observed.sum())})"

    def coords(self, cells: np.ndarray) -> np.ndarray:
        """Ego-frame centres (x, y) of flat cell indices."""
        rows, cols = np.divmod(np.asarray(cells, dtype=np.int64), self.spec.width)
        r = self.spec.resolution
        return np.stack(
            [self.spec.origin_x + (cols + 0.5) * r, self.spec.origin_y + (rows + 0.5) * r], axis=1
        )


def frame_sets(
    model: SemanticNP, inputs: FrameInputs, sample: CellSample
) -> Tuple[ContextSet, TargetSet, Tensor]:
    """Runs the fusion network once and looks up the context and target rows."""
    fused = model.fuse_semantics(inputs.semantics, inputs.observed)
    context = ContextSet(
        inputs.coords(sample.context_cells),
        sample.context_heights,
        model.cell_features(fused, sample.context_cells),
    )
    targets = TargetSet(
        inputs.coords(sample.target_cells), model.cell_features(fused, sample.target_cells)
    )
    return context, targets, fused


def iter_frame_inputs(
    dataset: Dataset,
    config: TrainConfig,
    only: Optional[Set[str]] = None,
) -> Iterator[FrameInputs]:
    """
    Walks every scene in order. Earlier frames of a scene feed the LiDAR
    aggregation and the semantic belief even when only the frames named in
    ``only`` are yielded.

    ``config.no_temporal`` bins the current scan alone and uses the current
    semantic grid as is; ``config.no_semantics`` zeroes the semantic grid.
    """
    spec = dataset.spec
    d = dataset.feature_dim
    for scene in dataset.scenes:
        history: List[PointSet] = []
        belief: Optional[BeliefGrid] = None
        previous: Optional[Frame] = None
        for frame in scene.frames:
            scan = frame.point_set()
            current = bin_min_height(
                PointSet(world_to_ego(scan.points, frame.pose), frame.pose, frame.name), spec
            )
            if config.no_temporal:
                context = current
            else:
                history.append(scan)
                history = history[-config.lidar_horizon :]
                context = bin_min_height(
                    aggregate_lidar(history, frame.pose, config.lidar_horizon), spec
                )

            if frame.semantics is None or frame.density is None:
                raw = np.zeros((d,) + spec.shape)
                density = np.zeros(spec.shape)
            else:
                raw, density = frame.semantics, frame.density
            if not config.no_temporal:
                if belief is None or previous is None:
                    belief = BeliefGrid.empty(d, spec)
                else:
                    belief = warp_belief(belief, previous.pose, frame.pose, spec)
                belief = bayes_update(belief, raw, density)
                raw = belief.f
            if config.no_semantics:
                raw = np.zeros((d,) + spec.shape)
            previous = frame

            if only is not None and frame.name not in only:
                continue
            logger.debug(
                "inputs of %s: %d observed, %d context cells",
                frame.name,
                int(current.valid.sum()),
                int(context.valid.sum()),
            )
            yield FrameInputs(frame, spec, context, current.valid, raw, frame.ground_truth())
