import csv
import logging
from pathlib import Path
from typing import List, Union

import numpy as np

from terranp.bev.grid import ElevationGrid
from terranp.core.exceptions import DataError

logger = logging.getLogger(__name__)

GRID_CSV_HEADER = ["row", "col", "value", "valid"]


def write_grid_csv(path: Union[str, Path], grid: ElevationGrid) -> Path:
    """Writes ``row,col,value,valid``, one line per cell, 6 decimals."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    h, w = grid.shape
    try:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(GRID_CSV_HEADER)
            for row in range(h):
                for col in range(w):
                    valid = bool(grid.valid[row, col])
                    value = f"{grid.values[row, col]:.6f}" if valid else "nan"
                    writer.writerow([row, col, value, int(valid)])
    except OSError as e:
        raise DataError(f"can't write grid csv {path}: {e}") from e
    logger.debug("wrote %dx%d grid to %s", h, w, path)
    return path


def read_grid_csv(path: Union[str, Path]) -> ElevationGrid:
    """
    Reads a grid written by :func:`write_grid_csv`. The grid dimensions are
    one past the largest row and column found.

    Raises:
        :obj:`terranp.core.exceptions.DataError`: unreadable or malformed file
    """
    path = Path(path)
    rows: List[int] = []
    cols: List[int] = []
    values: List[float] = []
    valids: List[bool] = []
    try:
        with open(path, "r", newline="", encoding="utf-8") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != GRID_CSV_HEADER:
                raise DataError(f"{path}: expected header {','.join(GRID_CSV_HEADER)}")
            for lineno, record in enumerate(reader, start=2):
                if not record:
                    continue
                if len(record) != 4:
                    raise DataError(f"{path}:{lineno}: expected 4 fields, got {len(record)}")
                try:
                    rows.append(int(record[0]))
                    cols.append(int(record[1]))
                    values.append(float(record[2]))
                    valids.append(bool(int(record[3])))
                except ValueError as e:
                    raise DataError(f"{path}:{lineno}: {e}") from e
    except OSError as e:
        raise DataError(f"can't read grid csv {path}: {e}") from e

    if not rows:
        raise DataError(f"{path}: no cells")
    r = np.array(rows)
    c = np.array(cols)
    if r.min() < 0 or c.min() < 0:
        raise DataError(f"{path}: negative cell index")
    shape = (int(r.max()) + 1, int(c.max()) + 1)
    grid_values = np.full(shape, np.nan)
    grid_valid = np.zeros(shape, dtype=bool)
    grid_values[r, c] = values
    grid_valid[r, c] = valids
    if not np.all(np.isfinite(grid_values[grid_valid])):
        raise DataError(f"{path}: valid cell with non-finite value")
    return ElevationGrid(grid_values, grid_valid)
