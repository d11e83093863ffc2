"""
Per-cell Bayesian fusion of semantic BEV features over time.

Every cell keeps a feature vector ``f`` and the probability ``p`` that the
vector is correct. A new observation ``(f̂, p̂)`` is folded in under a uniform
prior and conditional independence; probabilities stay clamped to
``[δ, 1 - δ]`` so every update is defined.
"""
import csv
import logging
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from terranp.bev.grid import EgoPose, GridSpec, ego_to_world, world_to_ego
from terranp.core.exceptions import DataError, ShapeError

logger = logging.getLogger(__name__)

DELTA = 1e-4


def clamp(p: np.ndarray) -> np.ndarray:
    return np.clip(p, DELTA, 1.0 - DELTA)


class BeliefGrid(object):
    """
    Attributes:
        f (np.ndarray): (D_f, H, W) fused features
        p (np.ndarray): (H, W) correctness probabilities in ``[δ, 1 - δ]``
    """

    __slots__ = ("f", "p")

    def __init__(self, f: np.ndarray, p: np.ndarray) -> None:
        f = np.asarray(f, dtype=np.float64)
        p = np.asarray(p, dtype=np.float64)
        if f.ndim != 3 or f.shape[1:] != p.shape:
            raise ShapeError(f"belief features {f.shape} don't match probabilities {p.shape}")
        self.f = f
        self.p = clamp(p)

    @classmethod
    def empty(cls, feature_dim: int, spec: GridSpec) -> "BeliefGrid":
        return cls(np.zeros((feature_dim,) + spec.shape), np.full(spec.shape, DELTA))

    def __repr__(self) -> str:
        return f"BeliefGrid({self.f.shape[0]}x{self.p.shape[0]}x{self.p.shape[1]})"


def splat_features(
    points: np.ndarray, features: np.ndarray, spec: GridSpec
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Averages point features per cell.

    Returns:
        f̂ (D_f, H, W), zero in empty cells, and p̂ (H, W): the point count
        normalised by the frame's maximum count, clamped
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    features = np.asarray(features, dtype=np.float64).reshape(len(points), -1)
    d = features.shape[1]
    rows, cols, inside = spec.cells_of(points[:, 0], points[:, 1])
    flat = rows[inside] * spec.width + cols[inside]
    counts = np.bincount(flat, minlength=spec.size).astype(np.float64)
    sums = np.stack(
        [np.bincount(flat, weights=features[inside, c], minlength=spec.size) for c in range(d)]
    ) if d else np.zeros((0, spec.size))
    f_hat = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
    peak = counts.max() if counts.size else 0.0
    p_hat = counts / peak if peak > 0 else np.zeros_like(counts)
    return f_hat.reshape((d,) + spec.shape), clamp(p_hat).reshape(spec.shape)


def bayes_update(prev: BeliefGrid, f_hat: np.ndarray, p_hat: np.ndarray) -> BeliefGrid:
    """
    ``f_t = (p̂·f̂ + p·f) / (p̂ + p)`` and
    ``p_t = p̂·p / (p̂·p + (1 - p̂)(1 - p))``, per cell.
    """
    f_hat = np.asarray(f_hat, dtype=np.float64)
    p_hat = clamp(np.asarray(p_hat, dtype=np.float64))
    if f_hat.shape != prev.f.shape or p_hat.shape != prev.p.shape:
        raise ShapeError("observation and belief grids aren't aligned")
    p = prev.p
    f = (p_hat * f_hat + p * prev.f) / (p_hat + p)
    # p̂p + (1 - p̂)(1 - p) expanded so that p̂ = 0.5 leaves p bit-identical
    p_new = (p_hat * p) / ((1.0 - p_hat) - p * (1.0 - 2.0 * p_hat))
    return BeliefGrid(f, p_new)


def warp_belief(
    belief: BeliefGrid, prev_pose: EgoPose, curr_pose: EgoPose, spec: GridSpec
) -> BeliefGrid:
    """
    Resamples ``belief`` from the ego grid of ``prev_pose`` into the one of
    ``curr_pose`` (nearest cell). Cells with no source start over at
    ``p = δ``, ``f = 0``.
    """
    ex, ey = spec.centers()
    ego = np.stack([ex.ravel(), ey.ravel(), np.zeros(ex.size)], axis=1)
    prev_ego = world_to_ego(ego_to_world(ego, curr_pose), prev_pose)
    rows, cols, inside = spec.cells_of(prev_ego[:, 0], prev_ego[:, 1])
    f = np.zeros((belief.f.shape[0], spec.size))
    p = np.full(spec.size, DELTA)
    f[:, inside] = belief.f[:, rows[inside], cols[inside]]
    p[inside] = belief.p[rows[inside], cols[inside]]
    return BeliefGrid(f.reshape(belief.f.shape), p.reshape(spec.shape))


def write_belief_csv(path: Union[str, Path], belief: BeliefGrid) -> Path:
    """
    Snapshot in the grid CSV layout with a leading ``block`` column: one
    block per feature channel (``f0``, ``f1``, ...) and a ``p`` block.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    d, h, w = belief.f.shape
    observed = belief.p > DELTA
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["block", "row", "col", "value", "valid"])
            blocks = [(f"f{c}", belief.f[c]) for c in range(d)] + [("p", belief.p)]
            for name, values in blocks:
                for row in range(h):
                    for col in range(w):
                        writer.writerow(
                            [name, row, col, f"{values[row, col]:.6f}", int(observed[row, col])]
                        )
    except OSError as e:
        raise DataError(f"can't write belief snapshot {path}: {e}") from e
    return path
