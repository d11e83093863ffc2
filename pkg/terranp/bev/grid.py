import logging
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from terranp.core.configuration import GridConfig
from terranp.core.exceptions import ConfigurationError, DataError, ShapeError

logger = logging.getLogger(__name__)


class EgoPose(object):
    """
    Planar pose of the vehicle plus its elevation, in world coordinates.

    Arguments:
        x: meters
        y: meters
        z: sensor elevation in meters
        yaw: heading in radians, 0 looks along +x
        tag: name of the frame the pose belongs to
    """

    __slots__ = ("x", "y", "z", "yaw", "tag")

    def __init__(self, x: float, y: float, z: float, yaw: float, tag: str = "") -> None:
        values = np.array([x, y, z, yaw], dtype=np.float64)
        if not np.all(np.isfinite(values)):
            raise DataError(f"pose {tag!r} has non-finite components")
        self.x, self.y, self.z, self.yaw = (float(v) for v in values)
        self.tag = tag

    def __repr__(self) -> str:
        return (
            f"EgoPose({self.tag!r}, x={self.x:.3f}, y={self.y:.3f}, "
            f"z={self.z:.3f}, yaw={self.yaw:.4f})"
        )

    def array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.yaw], dtype=np.float64)

    def dict(self) -> Dict[str, Any]:
        return {item: getattr(self, item) for item in self.__slots__}


def world_to_ego(points: np.ndarray, pose: EgoPose) -> np.ndarray:
    """
    Expresses (N, 3) world points in the ego frame of ``pose``: translation by
    the ego position (z included) followed by a rotation of ``-yaw``.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    c, s = np.cos(pose.yaw), np.sin(pose.yaw)
    dx = points[:, 0] - pose.x
    dy = points[:, 1] - pose.y
    out = np.empty_like(points)
    out[:, 0] = c * dx + s * dy
    out[:, 1] = -s * dx + c * dy
    out[:, 2] = points[:, 2] - pose.z
    return out


def ego_to_world(points: np.ndarray, pose: EgoPose) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    c, s = np.cos(pose.yaw), np.sin(pose.yaw)
    out = np.empty_like(points)
    out[:, 0] = c * points[:, 0] - s * points[:, 1] + pose.x
    out[:, 1] = s * points[:, 0] + c * points[:, 1] + pose.y
    out[:, 2] = points[:, 2] + pose.z
    return out


class GridSpec(object):
    """
    Geometry of an ego-centred BEV raster. Cell ``(row, col)`` covers
    ``[origin_x + col·R, origin_x + (col+1)·R) × [origin_y + row·R, ...)``;
    intervals are half-open so binning partitions the plane.
    """

    __slots__ = ("origin_x", "origin_y", "resolution", "height", "width")

    def __init__(
        self,
        origin_x: float = -51.2,
        origin_y: float = -51.2,
        resolution: float = 0.4,
        height: int = 256,
        width: int = 256,
    ) -> None:
        if not resolution > 0:
            raise ConfigurationError(f"grid resolution must be positive, got {resolution}")
        if height <= 0 or width <= 0:
            raise ConfigurationError(f"grid dims must be positive, got {height}x{width}")
        self.origin_x = float(origin_x)
        self.origin_y = float(origin_y)
        self.resolution = float(resolution)
        self.height = int(height)
        self.width = int(width)

    @classmethod
    def from_config(cls, config: GridConfig) -> "GridSpec":
        return cls(**config.dict())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GridSpec):
            return NotImplemented
        return self.dict() == other.dict()

    def __repr__(self) -> str:
        return (
            f"GridSpec(origin=({self.origin_x}, {self.origin_y}), "
            f"R={self.resolution}, {self.height}x{self.width})"
        )

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.height, self.width)

    @property
    def size(self) -> int:
        return self.height * self.width

    def dict(self) -> Dict[str, Any]:
        return {item: getattr(self, item) for item in self.__slots__}

    def _index(self, coord: np.ndarray, origin: float) -> np.ndarray:
        r = self.resolution
        idx = np.floor((coord - origin) / r)
        # keep the index consistent with the cell edges origin + k·R
        idx = np.where(origin + idx * r > coord, idx - 1, idx)
        idx = np.where(origin + (idx + 1) * r <= coord, idx + 1, idx)
        return idx

    def cells_of(
        self, xs: np.ndarray, ys: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Vectorised :func:`cell_of`.

        Returns:
            rows, cols and a boolean ``inside`` mask; rows/cols of outside
            points are meaningless
        """
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        rows = self._index(ys, self.origin_y)
        cols = self._index(xs, self.origin_x)
        inside = (rows >= 0) & (rows < self.height) & (cols >= 0) & (cols < self.width)
        rows = np.where(inside, rows, 0).astype(np.int64)
        cols = np.where(inside, cols, 0).astype(np.int64)
        return rows, cols, inside

    def cell_center(self, row: int, col: int) -> Tuple[float, float]:
        r = self.resolution
        return self.origin_x + (col + 0.5) * r, self.origin_y + (row + 0.5) * r

    def centers(self) -> Tuple[np.ndarray, np.ndarray]:
        """x and y of every cell centre, both (H, W)."""
        r = self.resolution
        xs = self.origin_x + (np.arange(self.width) + 0.5) * r
        ys = self.origin_y + (np.arange(self.height) + 0.5) * r
        return np.meshgrid(xs, ys)


def cell_of(x: float, y: float, spec: GridSpec) -> Optional[Tuple[int, int]]:
    """``(row, col)`` of the cell holding ``(x, y)``, ``None`` when out of range."""
    rows, cols, inside = spec.cells_of(np.array([x]), np.array([y]))
    if not inside[0]:
        return None
    return int(rows[0]), int(cols[0])


class ElevationGrid(object):
    """
    Per-cell heights with a validity mask. Invalid cells hold NaN and are
    never read arithmetically.
    """

    __slots__ = ("values", "valid")

    def __init__(self, values: np.ndarray, valid: np.ndarray) -> None:
        values = np.asarray(values, dtype=np.float64)
        valid = np.asarray(valid, dtype=bool)
        if values.shape != valid.shape or values.ndim != 2:
            raise ShapeError(f"values {values.shape} and mask {valid.shape} disagree")
        if not np.all(np.isfinite(values[valid])):
            raise DataError("valid cells must hold finite heights")
        self.values = np.where(valid, values, np.nan)
        self.valid = valid

    @classmethod
    def empty(cls, spec: GridSpec) -> "ElevationGrid":
        return cls(np.full(spec.shape, np.nan), np.zeros(spec.shape, dtype=bool))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape  # type: ignore

    def __repr__(self) -> str:
        return f"ElevationGrid({self.shape[0]}x{self.shape[1]}, valid={int(self.valid.sum())})"

    def copy(self) -> "ElevationGrid":
        return ElevationGrid(self.values.copy(), self.valid.copy())


class PointSet(object):
    """
    Range returns ``(N, 3)`` of one frame, with the frame tag and the pose of
    the vehicle when they were taken.
    """

    __slots__ = ("points", "tag", "pose")

    def __init__(self, points: np.ndarray, pose: EgoPose, tag: Optional[str] = None) -> None:
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(points)):
            raise DataError(f"point set {tag or pose.tag!r} has non-finite coordinates")
        self.points = points
        self.pose = pose
        self.tag = tag if tag is not None else pose.tag

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def __repr__(self) -> str:
        return f"PointSet({self.tag!r}, {len(self)} points)"


Points = Union[PointSet, np.ndarray]


def _as_array(points: Points) -> np.ndarray:
    if isinstance(points, PointSet):
        return points.points
    return np.asarray(points, dtype=np.float64).reshape(-1, 3)


def bin_min_height(points: Points, spec: GridSpec) -> ElevationGrid:
    """Minimum z of the in-range points falling into each cell."""
    arr = _as_array(points)
    rows, cols, inside = spec.cells_of(arr[:, 0], arr[:, 1])
    flat = rows[inside] * spec.width + cols[inside]
    values = np.full(spec.size, np.inf)
    np.minimum.at(values, flat, arr[inside, 2])
    valid = np.isfinite(values)
    values[~valid] = np.nan
    return ElevationGrid(values.reshape(spec.shape), valid.reshape(spec.shape))


def observed_mask(grid: ElevationGrid) -> np.ndarray:
    return grid.valid.copy()


def aggregate_ground_truth(
    frames: Sequence[PointSet], t: int, window: int, spec: GridSpec
) -> ElevationGrid:
    """
    Min-height binning of the union of the scans ``t - window//2`` up to
    ``t - window//2 + window - 1`` (clipped to the sequence), expressed in the
    ego grid of frame ``t``. ``frames`` hold world coordinates.
    """
    if not 0 <= t < len(frames):
        raise DataError(f"frame index {t} outside sequence of {len(frames)} frames")
    if window < 1:
        raise ShapeError(f"window must be positive, got {window}")
    lo = max(0, t - window // 2)
    hi = min(len(frames), t - window // 2 + window)
    chunks = [frames[i].points for i in range(lo, hi)]
    world = np.concatenate(chunks, axis=0) if chunks else np.empty((0, 3))
    return bin_min_height(world_to_ego(world, frames[t].pose), spec)


def analytic_ground_truth(
    field: Any, pose: EgoPose, spec: GridSpec, samples: int = 3
) -> ElevationGrid:
    """
    Ground truth straight from a procedural terrain: the minimum over a
    ``samples × samples`` sub-grid of each cell, relative to the ego z. Every
    cell is valid.
    """
    r = spec.resolution
    offsets = (np.arange(samples) + 0.5) / samples * r
    xs = spec.origin_x + np.arange(spec.width)[:, None] * r + offsets[None, :]
    ys = spec.origin_y + np.arange(spec.height)[:, None] * r + offsets[None, :]
    # (H, s, W, s) sub-sample lattice
    ex = np.broadcast_to(xs[None, None, :, :], (spec.height, samples, spec.width, samples))
    ey = np.broadcast_to(ys[:, :, None, None], (spec.height, samples, spec.width, samples))
    ego = np.stack([ex.ravel(), ey.ravel(), np.zeros(ex.size)], axis=1)
    world = ego_to_world(ego, pose)
    h = field.height(world[:, 0], world[:, 1]).reshape(ex.shape)
    values = h.min(axis=(1, 3)) - pose.z
    return ElevationGrid(values, np.ones(spec.shape, dtype=bool))
