from terranp.bev.grid import (
    EgoPose,
    ElevationGrid,
    GridSpec,
    PointSet,
    aggregate_ground_truth,
    bin_min_height,
    ego_to_world,
    observed_mask,
    world_to_ego,
)
from terranp.bev.spatial import HashGrid, NeighborLists, build, query_ball

__all__ = (
    "EgoPose",
    "ElevationGrid",
    "GridSpec",
    "HashGrid",
    "NeighborLists",
    "PointSet",
    "aggregate_ground_truth",
    "bin_min_height",
    "build",
    "ego_to_world",
    "observed_mask",
    "query_ball",
    "world_to_ego",
)
