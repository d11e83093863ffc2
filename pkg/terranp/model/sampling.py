import logging
from typing import Optional

import numpy as np

from terranp.bev.grid import ElevationGrid
from terranp.core.configuration import ModelConfig
from terranp.core.exceptions import EmptySetError, ShapeError

logger = logging.getLogger(__name__)


class CellSample(object):
    """
    Context and target cells of one frame as flat indices into the grid.

    Attributes:
        context_cells (np.ndarray): (C,) cells conditioned on
        context_heights (np.ndarray): (C,) heights observed there
        target_cells (np.ndarray): (T,) cells predicted
        target_heights (np.ndarray): (T,) ground truth there
    """

    __slots__ = ("context_cells", "context_heights", "target_cells", "target_heights")

    def __init__(
        self,
        context_cells: np.ndarray,
        context_heights: np.ndarray,
        target_cells: np.ndarray,
        target_heights: np.ndarray,
    ) -> None:
        self.context_cells = np.asarray(context_cells, dtype=np.int64)
        self.context_heights = np.asarray(context_heights, dtype=np.float64)
        self.target_cells = np.asarray(target_cells, dtype=np.int64)
        self.target_heights = np.asarray(target_heights, dtype=np.float64)

    def __repr__(self) -> str:
        return f"CellSample(context={len(self.context_cells)}, targets={len(self.target_cells)})"


def sample_context_target(
    context: ElevationGrid,
    gt: ElevationGrid,
    config: ModelConfig,
    rng: Optional[np.random.Generator] = None,
    training: bool = True,
) -> CellSample:
    """
    Picks context and target cells of a frame.

    In evaluation every valid cell of the context grid is context and every
    GT-valid cell is a target. In training the context is a uniform subset of
    the cells valid in both grids, of size
    ``min(U(min_context, max_context), available, max_targets)``, and the
    targets are those context cells (with their GT heights) topped up with
    other GT-valid cells to at most ``max_targets``, so the context is always
    a subset of the targets.

    Raises:
        :obj:`terranp.core.exceptions.EmptySetError`: no GT-valid cell
    """
    if context.shape != gt.shape:
        raise ShapeError(f"context grid {context.shape} and GT grid {gt.shape} disagree")
    observed = context.valid.reshape(-1)
    valid = gt.valid.reshape(-1)
    if not valid.any():
        raise EmptySetError("frame has no GT-valid cells")
    heights = context.values.reshape(-1)
    truth = gt.values.reshape(-1)

    if not training:
        ctx = np.flatnonzero(observed)
        tgt = np.flatnonzero(valid)
        return CellSample(ctx, heights[ctx], tgt, truth[tgt])

    rng = rng if rng is not None else np.random.default_rng()
    pool = np.flatnonzero(observed & valid)
    drawn = int(rng.integers(config.min_context, config.max_context + 1))
    size = min(drawn, len(pool), config.max_targets)
    ctx = np.sort(rng.choice(pool, size=size, replace=False)) if size else pool[:0]

    rest = np.flatnonzero(valid)
    rest = rest[~np.isin(rest, ctx)]
    extra = min(len(rest), config.max_targets - size)
    more = rng.choice(rest, size=extra, replace=False) if extra else rest[:0]
    tgt = np.sort(np.concatenate([ctx, more]))
    logger.debug("sampled %d context and %d target cells", size, len(tgt))
    return CellSample(ctx, heights[ctx], tgt, truth[tgt])
