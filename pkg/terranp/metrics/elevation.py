"""
Elevation, slope and curvature errors, split into observed and unobserved
cells.

Every metric is accumulated as a :obj:`Stat` (sum of absolute errors and
cell count) so that frames can be pooled exactly later on.
"""
import logging
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from terranp.bev.grid import ElevationGrid, GridSpec
from terranp.core.exceptions import EmptySetError, ShapeError

logger = logging.getLogger(__name__)

SPLITS = ("total", "observed", "unobserved")


class Stat(object):
    """Running sum and count of absolute errors."""

    __slots__ = ("sum", "count")

    def __init__(self, sum: float = 0.0, count: int = 0) -> None:
        self.sum = float(sum)
        self.count = int(count)

    def __repr__(self) -> str:
        return f"Stat(sum={self.sum}, count={self.count})"

    def __add__(self, other: "Stat") -> "Stat":
        return Stat(self.sum + other.sum, self.count + other.count)

    @classmethod
    def of(cls, errors: np.ndarray) -> "Stat":
        return cls(float(np.sum(errors)), int(np.size(errors)))

    @property
    def mean(self) -> Optional[float]:
        """``None`` when nothing was accumulated."""
        return self.sum / self.count if self.count else None


class Splits(NamedTuple):
    total: Optional[float]
    observed: Optional[float]
    unobserved: Optional[float]


SplitStats = Dict[str, Stat]


def _check(pred: ElevationGrid, gt: ElevationGrid, observed: np.ndarray) -> np.ndarray:
    observed = np.asarray(observed, dtype=bool)
    if pred.shape != gt.shape or observed.shape != gt.shape:
        raise ShapeError(
            f"prediction {pred.shape}, ground truth {gt.shape} and mask {observed.shape} disagree"
        )
    if not gt.valid.any():
        raise EmptySetError("no GT-valid cells to evaluate")
    return observed


def split_stats(errors: np.ndarray, valid: np.ndarray, observed: np.ndarray) -> SplitStats:
    """Pools ``errors`` over ``valid`` cells into the three splits."""
    return {
        "total": Stat.of(errors[valid]),
        "observed": Stat.of(errors[valid & observed]),
        "unobserved": Stat.of(errors[valid & ~observed]),
    }


def merge_splits(*parts: SplitStats) -> SplitStats:
    return {s: sum((p[s] for p in parts), Stat()) for s in SPLITS}


def to_splits(stats: SplitStats) -> Splits:
    return Splits(*(stats[s].mean for s in SPLITS))


def elevation_stats(pred: ElevationGrid, gt: ElevationGrid, observed: np.ndarray) -> SplitStats:
    observed = _check(pred, gt, observed)
    valid = gt.valid & pred.valid
    errors = np.zeros(gt.shape)
    errors[valid] = np.abs(pred.values[valid] - gt.values[valid])
    return split_stats(errors, valid, observed)


def mae_split(pred: ElevationGrid, gt: ElevationGrid, observed: np.ndarray) -> Splits:
    """
    Mean ``|pred - gt|`` over all, observed and unobserved GT-valid cells.
    Splits without cells are ``None``.

    Raises:
        :obj:`terranp.core.exceptions.EmptySetError`: no GT-valid cell
    """
    return to_splits(elevation_stats(pred, gt, observed))


def axis_slopes(grid: ElevationGrid, resolution: float, axis: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Slope in percent along ``axis`` (1 is x, 0 is y): central differences in
    the interior, one-sided differences on the first and last cell.

    Returns:
        slopes and the mask of cells whose stencil is entirely valid
    """
    h = np.moveaxis(np.where(grid.valid, grid.values, 0.0), axis, -1)
    v = np.moveaxis(grid.valid, axis, -1)
    n = h.shape[-1]
    slope = np.zeros_like(h)
    ok = np.zeros_like(v)
    if n >= 2:
        slope[..., 0] = (h[..., 1] - h[..., 0]) / resolution
        ok[..., 0] = v[..., 1] & v[..., 0]
        slope[..., -1] = (h[..., -1] - h[..., -2]) / resolution
        ok[..., -1] = v[..., -1] & v[..., -2]
    if n >= 3:
        slope[..., 1:-1] = (h[..., 2:] - h[..., :-2]) / (2.0 * resolution)
        ok[..., 1:-1] = v[..., 2:] & v[..., :-2]
    return np.moveaxis(100.0 * slope, -1, axis), np.moveaxis(ok, -1, axis)


def slope_stats(
    pred: ElevationGrid, gt: ElevationGrid, spec: GridSpec, observed: np.ndarray
) -> SplitStats:
    observed = _check(pred, gt, observed)
    parts: List[SplitStats] = []
    for axis in (1, 0):
        sp, okp = axis_slopes(pred, spec.resolution, axis)
        sg, okg = axis_slopes(gt, spec.resolution, axis)
        valid = okp & okg
        parts.append(split_stats(np.abs(sp - sg), valid, observed))
    return merge_splits(*parts)


def slope_mae(
    pred: ElevationGrid, gt: ElevationGrid, spec: GridSpec, observed: np.ndarray
) -> Splits:
    """
    MAE of the percent slopes ``100·Δh/Δx`` and ``100·Δh/Δy``, both axes
    pooled into one mean. A cell contributes on an axis only where the whole
    stencil is valid in both grids.
    """
    return to_splits(slope_stats(pred, gt, spec, observed))


def laplacian(grid: ElevationGrid, resolution: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    5-point Laplacian divided by ``R²`` and the mask of interior cells whose
    five stencil cells are valid.
    """
    h = np.where(grid.valid, grid.values, 0.0)
    v = grid.valid
    lap = np.zeros_like(h)
    ok = np.zeros_like(v)
    if h.shape[0] >= 3 and h.shape[1] >= 3:
        lap[1:-1, 1:-1] = (
            h[2:, 1:-1] + h[:-2, 1:-1] + h[1:-1, 2:] + h[1:-1, :-2] - 4.0 * h[1:-1, 1:-1]
        ) / (resolution * resolution)
        ok[1:-1, 1:-1] = v[2:, 1:-1] & v[:-2, 1:-1] & v[1:-1, 2:] & v[1:-1, :-2] & v[1:-1, 1:-1]
    return lap, ok


def curvature_stats(
    pred: ElevationGrid, gt: ElevationGrid, spec: GridSpec, observed: np.ndarray
) -> SplitStats:
    observed = _check(pred, gt, observed)
    lp, okp = laplacian(pred, spec.resolution)
    lg, okg = laplacian(gt, spec.resolution)
    return split_stats(np.abs(lp - lg), okp & okg, observed)


def curvature_mae(
    pred: ElevationGrid, gt: ElevationGrid, spec: GridSpec, observed: np.ndarray
) -> Splits:
    """MAE of the Laplacians, in 1/m."""
    return to_splits(curvature_stats(pred, gt, spec, observed))
