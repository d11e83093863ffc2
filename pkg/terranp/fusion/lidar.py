import logging
from typing import Sequence

import numpy as np

from terranp.bev.grid import EgoPose, PointSet, world_to_ego
from terranp.core.exceptions import UsageError

logger = logging.getLogger(__name__)


def aggregate_lidar(frames: Sequence[PointSet], current: EgoPose, horizon: int = 50) -> PointSet:
    """
    Union of the last ``horizon`` world-frame scans expressed in the ego frame
    of ``current``. Subtracting the current ego z is what compensates the
    vehicle's elevation changes; old points weigh as much as new ones.
    """
    if horizon < 1:
        raise UsageError(f"horizon must be at least 1, got {horizon}")
    recent = list(frames)[-horizon:]
    world = (
        np.concatenate([f.points for f in recent], axis=0) if recent else np.empty((0, 3))
    )
    logger.debug("aggregated %d scans, %d points into %s", len(recent), len(world), current.tag)
    return PointSet(world_to_ego(world, current), current)
