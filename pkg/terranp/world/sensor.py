import logging
from typing import Any, Dict, Optional, Union

import numpy as np

from terranp.bev.grid import EgoPose, PointSet
from terranp.core.configuration import SensorConfig
from terranp.core.exceptions import ConfigurationError
from terranp.world.terrain import TerrainField

logger = logging.getLogger(__name__)

# ray positions evaluated per vectorised marching chunk
MARCH_CHUNK = 32

Seed = Union[int, np.random.Generator, None]


class SensorModel(object):
    """
    Single spinning range sensor.

    Arguments:
        mount_height: meters above the ground
        azimuth_count: rays per revolution
        elevations: beam elevation angles in radians, sorted
        max_range: meters along the ray
        z_noise: standard deviation of the z noise in meters
        march_step: ray marching step in meters
    """

    __slots__ = (
        "mount_height",
        "azimuth_count",
        "elevations",
        "max_range",
        "z_noise",
        "march_step",
    )

    def __init__(
        self,
        mount_height: float = 1.8,
        azimuth_count: int = 720,
        elevations: Optional[np.ndarray] = None,
        max_range: float = 80.0,
        z_noise: float = 0.02,
        march_step: float = 0.05,
    ) -> None:
        if elevations is None:
            elevations = np.deg2rad(np.linspace(-25.0, 5.0, 32))
        elevations = np.asarray(elevations, dtype=np.float64)
        if np.any(np.diff(elevations) < 0):
            raise ConfigurationError("beam elevations must be sorted")
        if max_range <= 0 or march_step <= 0:
            raise ConfigurationError("max_range and march_step must be positive")
        if z_noise < 0:
            raise ConfigurationError("z_noise must be non-negative")
        self.mount_height = float(mount_height)
        self.azimuth_count = int(azimuth_count)
        self.elevations = elevations
        self.max_range = float(max_range)
        self.z_noise = float(z_noise)
        self.march_step = float(march_step)

    @classmethod
    def from_config(cls, config: SensorConfig) -> "SensorModel":
        return cls(
            mount_height=config.mount_height,
            azimuth_count=config.azimuth_count,
            elevations=np.deg2rad(
                np.linspace(config.elevation_min_deg, config.elevation_max_deg, config.beams)
            ),
            max_range=config.max_range,
            z_noise=config.z_noise,
            march_step=config.march_step,
        )

    def __repr__(self) -> str:
        return (
            f"SensorModel({self.azimuth_count}x{len(self.elevations)} rays, "
            f"range={self.max_range}, step={self.march_step})"
        )

    def dict(self) -> Dict[str, Any]:
        return {item: getattr(self, item) for item in self.__slots__}

    def directions(self, yaw: float = 0.0) -> np.ndarray:
        """Unit direction of every ray, (azimuth_count · beams, 3)."""
        az = yaw + 2 * np.pi * np.arange(self.azimuth_count) / self.azimuth_count
        a, e = np.meshgrid(az, self.elevations, indexing="ij")
        return np.stack(
            [np.cos(e) * np.cos(a), np.cos(e) * np.sin(a), np.sin(e)], axis=-1
        ).reshape(-1, 3)


def _rng(seed: Seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def march_rays(
    origin: np.ndarray, directions: np.ndarray, field: TerrainField, step: float, max_range: float
) -> np.ndarray:
    """
    Distance along each ray to its first terrain crossing, NaN when the ray
    leaves the range (or climbs above the terrain's highest point) first.

    The crossing is bracketed by the marching step, refined by one bisection
    step and then a secant interpolation inside the remaining bracket.
    """
    n_rays = directions.shape[0]
    n_steps = int(np.floor(max_range / step + 1e-9))
    hit_t = np.full(n_rays, np.nan)
    active = np.arange(n_rays)
    top = field.max_height()

    def clearance(t: np.ndarray, rays: np.ndarray) -> np.ndarray:
        d = directions[rays]
        if t.ndim == 2:
            d = d[:, None, :]
        p = origin + t[..., None] * d
        return p[..., 2] - field.height(p[..., 0], p[..., 1])

    start = 0
    prev_t = np.zeros(active.size)
    prev_f = origin[2] - field.height(np.array([origin[0]]), np.array([origin[1]]))[0]
    prev_f = np.full(active.size, prev_f)
    while active.size and start < n_steps:
        stop = min(start + MARCH_CHUNK, n_steps)
        ts = np.arange(start + 1, stop + 1) * step  # (S,)
        t = np.broadcast_to(ts[None, :], (active.size, ts.size))
        f = clearance(t, active)  # (A, S)
        below = f <= 0
        crossed = below.any(axis=1)
        if np.any(crossed):
            rows = np.nonzero(crossed)[0]
            k = np.argmax(below[rows], axis=1)
            b = t[rows, k]
            fb = f[rows, k]
            a = np.where(k > 0, t[rows, np.maximum(k - 1, 0)], prev_t[rows])
            fa = np.where(k > 0, f[rows, np.maximum(k - 1, 0)], prev_f[rows])
            rays = active[rows]
            mid = 0.5 * (a + b)
            fm = clearance(mid, rays)
            upper = fm > 0
            a = np.where(upper, mid, a)
            fa = np.where(upper, fm, fa)
            b = np.where(upper, b, mid)
            fb = np.where(upper, fb, fm)
            denom = fa - fb
            safe = np.where(denom > 0, denom, 1.0)
            hit_t[rays] = np.where(denom > 0, a + (b - a) * fa / safe, b)

        z_end = origin[2] + ts[-1] * directions[active, 2]
        escaping = (directions[active, 2] >= 0) & (z_end > top)
        keep = ~crossed & ~escaping
        prev_t = t[keep, -1]
        prev_f = f[keep, -1]
        active = active[keep]
        start = stop
    return hit_t


def simulate_scan(
    pose: EgoPose, field: TerrainField, sensor: SensorModel, seed: Seed = None
) -> PointSet:
    """
    Casts every ray of ``sensor`` from ``pose`` (the sensor origin) and returns
    the world-frame hits, snapped onto the terrain surface plus Gaussian
    z-noise. Occlusion comes from the geometry only.
    """
    rng = _rng(seed)
    origin = np.array([pose.x, pose.y, pose.z], dtype=np.float64)
    directions = sensor.directions(pose.yaw)
    t = march_rays(origin, directions, field, sensor.march_step, sensor.max_range)
    hit = np.isfinite(t)
    p = origin[None, :] + t[hit, None] * directions[hit]
    z = field.height(p[:, 0], p[:, 1])
    if sensor.z_noise > 0:
        z = z + rng.normal(0.0, sensor.z_noise, size=z.shape)
    points = np.stack([p[:, 0], p[:, 1], z], axis=1)
    logger.debug("scan %s: %d of %d rays returned", pose.tag, int(hit.sum()), hit.size)
    return PointSet(points, pose)
