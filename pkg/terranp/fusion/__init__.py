from terranp.fusion.belief import BeliefGrid, bayes_update, splat_features, warp_belief
from terranp.fusion.camera import CameraModel, lift_pixels, project_points
from terranp.fusion.lidar import aggregate_lidar

__all__ = (
    "BeliefGrid",
    "CameraModel",
    "aggregate_lidar",
    "bayes_update",
    "lift_pixels",
    "project_points",
    "splat_features",
    "warp_belief",
)
