"""
Synthetic semantic BEV features standing in for camera/LiDAR backbones.

Channels, in order: ground, ditch rim, slope, vegetation proxy (the four
class channels), surface normal z, tanh of the ego-frame x and y slopes and a
depression flag. ``feature_dim`` keeps the leading channels or pads with
noise-only channels.
"""
import logging
from typing import Any, Dict, Tuple, Union

import numpy as np

from terranp.bev.grid import EgoPose, GridSpec, ego_to_world
from terranp.core.configuration import SemanticsConfig
from terranp.world.terrain import TerrainField

logger = logging.getLogger(__name__)

CHANNELS = (
    "ground",
    "ditch_rim",
    "slope",
    "vegetation",
    "normal_z",
    "slope_x",
    "slope_y",
    "depression",
)

# slope magnitude thresholds (rise over run)
RIM_SLOPE = 1.0
SLOPE_SLOPE = 0.15
# feature contribution below which a cell counts as a depression, meters
DEPRESSION_DEPTH = 0.25


class SemanticFieldSpec(object):
    __slots__ = ("feature_dim", "noise", "fov_deg", "camera_range")

    def __init__(
        self,
        feature_dim: int = 8,
        noise: float = 0.05,
        fov_deg: float = 120.0,
        camera_range: float = 40.0,
    ) -> None:
        self.feature_dim = int(feature_dim)
        self.noise = float(noise)
        self.fov_deg = float(fov_deg)
        self.camera_range = float(camera_range)

    @classmethod
    def from_config(cls, config: SemanticsConfig) -> "SemanticFieldSpec":
        return cls(**config.dict())

    def dict(self) -> Dict[str, Any]:
        return {item: getattr(self, item) for item in self.__slots__}


def camera_visibility(spec: GridSpec, sem: SemanticFieldSpec) -> np.ndarray:
    """Cells inside the forward camera frustum (ego +x) and range."""
    ex, ey = spec.centers()
    r = np.hypot(ex, ey)
    angle = np.abs(np.arctan2(ey, ex))
    return (angle <= np.deg2rad(sem.fov_deg) / 2.0) & (r <= sem.camera_range)


def _world_centers(spec: GridSpec, pose: EgoPose) -> Tuple[np.ndarray, np.ndarray]:
    ex, ey = spec.centers()
    ego = np.stack([ex.ravel(), ey.ravel(), np.zeros(ex.size)], axis=1)
    world = ego_to_world(ego, pose)
    return world[:, 0].reshape(spec.shape), world[:, 1].reshape(spec.shape)


def terrain_channels(field: TerrainField, pose: EgoPose, spec: GridSpec) -> np.ndarray:
    """Noise-free (8, H, W) channels of the terrain under the ego grid."""
    wx, wy = _world_centers(spec, pose)
    gx, gy = field.gradient(wx, wy)
    slope = np.hypot(gx, gy)
    rim = slope >= RIM_SLOPE
    sloped = (slope >= SLOPE_SLOPE) & ~rim
    ground = ~rim & ~sloped
    vegetation = ground & (np.sin(0.37 * wx + 1.3) * np.sin(0.29 * wy + 0.7) > 0.5)
    ground = ground & ~vegetation
    c, s = np.cos(pose.yaw), np.sin(pose.yaw)
    return np.stack(
        [
            ground.astype(np.float64),
            rim.astype(np.float64),
            sloped.astype(np.float64),
            vegetation.astype(np.float64),
            1.0 / np.sqrt(1.0 + gx * gx + gy * gy),
            np.tanh(c * gx + s * gy),
            np.tanh(-s * gx + c * gy),
            (field.feature_height(wx, wy) < -DEPRESSION_DEPTH).astype(np.float64),
        ]
    )


def render_semantics(
    field: TerrainField,
    pose: EgoPose,
    spec: GridSpec,
    sem: SemanticFieldSpec,
    visibility: np.ndarray,
    seed: Union[int, np.random.Generator, None] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Returns:
        features (feature_dim, H, W) and density (H, W) in [0, 1]; density
        is 1 at the ego position falling linearly to 0 at the camera range
        and 0 outside ``visibility``; features are zero where density is 0
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    base = terrain_channels(field, pose, spec)
    d = sem.feature_dim
    if d <= base.shape[0]:
        features = base[:d].copy()
    else:
        features = np.concatenate([base, np.zeros((d - base.shape[0],) + spec.shape)])
    if sem.noise > 0:
        features += rng.normal(0.0, sem.noise, size=features.shape)

    ex, ey = spec.centers()
    decay = np.clip(1.0 - np.hypot(ex, ey) / sem.camera_range, 0.0, 1.0)
    density = np.where(visibility, decay, 0.0)
    features[:, density == 0] = 0.0
    return features, density
