"""
Binary PGM and PPM heatmaps of BEV rasters. Images are drawn north up:
the last grid row (largest y) is the first image row.
"""
import logging
from pathlib import Path
from typing import Union

import numpy as np

from terranp.bev.grid import ElevationGrid
from terranp.core.exceptions import DataError, UsageError

logger = logging.getLogger(__name__)

PALETTES = ("gray", "viridis")
MID_GRAY = 128

# anchor colours of the viridis ramp, evenly spaced over [0, 1]
_VIRIDIS = np.array(
    [
        [68, 1, 84],
        [59, 82, 139],
        [33, 145, 140],
        [94, 201, 98],
        [253, 231, 37],
    ],
    dtype=np.float64,
)


def normalize(grid: ElevationGrid) -> np.ndarray:
    """
    Min-max scales the valid cells to 1..255, invalid cells are 0. A grid
    whose valid cells are all equal comes out mid-gray.
    """
    out = np.zeros(grid.shape, dtype=np.uint8)
    valid = grid.valid & np.isfinite(grid.values)
    if not valid.any():
        return out
    values = grid.values[valid]
    lo, hi = values.min(), values.max()
    if hi > lo:
        out[valid] = (1 + np.rint(254 * (values - lo) / (hi - lo))).astype(np.uint8)
    else:
        out[valid] = MID_GRAY
    return out


def colorize(levels: np.ndarray) -> np.ndarray:
    """Maps 1..255 levels through the viridis ramp; level 0 stays black."""
    t = (levels.astype(np.float64) - 1) / 254
    x = np.linspace(0.0, 1.0, len(_VIRIDIS))
    rgb = np.stack([np.interp(t, x, _VIRIDIS[:, c]) for c in range(3)], axis=-1)
    rgb = np.rint(rgb).astype(np.uint8)
    rgb[levels == 0] = 0
    return rgb


def render(grid: ElevationGrid, palette: str = "gray") -> bytes:
    if palette not in PALETTES:
        raise UsageError(f"palette is one of {', '.join(PALETTES)}, got {palette!r}")
    levels = normalize(grid)[::-1]
    h, w = levels.shape
    if palette == "gray":
        return f"P5\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(levels).tobytes()
    return f"P6\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(colorize(levels)).tobytes()


def write_image(path: Union[str, Path], grid: ElevationGrid, palette: str = "gray") -> Path:
    """Writes ``grid`` as PGM (``gray``) or PPM (``viridis``)."""
    path = Path(path)
    data = render(grid, palette)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    except OSError as e:
        raise DataError(f"can't write image {path}: {e}") from e
    logger.debug("wrote %s", path)
    return path


def write_heatmap(path: Union[str, Path], values: np.ndarray, palette: str = "gray") -> Path:
    """Heatmap of a raster where NaN marks the cells to draw black."""
    values = np.asarray(values, dtype=np.float64)
    return write_image(path, ElevationGrid(values, np.isfinite(values)), palette)


def read_pgm(path: Union[str, Path]) -> np.ndarray:
    """Reads back a binary PGM written by :func:`write_image`, as (H, W) uint8."""
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if len(parts) != 4 or parts[0] != b"P5":
        raise DataError(f"{path}: not a binary PGM")
    w, h = (int(v) for v in parts[1].split())
    pixels = np.frombuffer(parts[3], dtype=np.uint8)
    if pixels.size != w * h:
        raise DataError(f"{path}: expected {w * h} pixels, got {pixels.size}")
    return pixels.reshape(h, w)
