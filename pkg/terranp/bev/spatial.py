"""
Uniform hash grid over 2D BEV points for ε-ball neighbour retrieval.

The cell size equals ε, so every point within ε of a query lies in the 3×3
block of cells around the query's cell.
"""
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from terranp.core.exceptions import DataError, UsageError

logger = logging.getLogger(__name__)

_OFFSETS = np.array([(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1)], dtype=np.int64)


class NeighborLists(object):
    """
    Ball members of each query, padded to ``k_max`` columns with ``-1``.
    Rows are sorted by distance, ties broken by index.

    Attributes:
        index (np.ndarray): (M, k_max) int64 neighbour indices, ``-1`` padding
        counts (np.ndarray): (M,) number of real neighbours per query
        k_max (int): column count
    """

    __slots__ = ("index", "counts", "k_max")

    def __init__(self, index: np.ndarray, counts: np.ndarray) -> None:
        self.index = np.asarray(index, dtype=np.int64)
        self.counts = np.asarray(counts, dtype=np.int64)
        self.k_max = int(self.index.shape[1]) if self.index.ndim == 2 else 0

    @classmethod
    def from_lists(
        cls, lists: Sequence[Sequence[int]], k_max: Optional[int] = None
    ) -> "NeighborLists":
        k = k_max if k_max is not None else max([len(x) for x in lists] + [1])
        index = np.full((len(lists), k), -1, dtype=np.int64)
        counts = np.zeros(len(lists), dtype=np.int64)
        for i, members in enumerate(lists):
            members = list(members)[:k]
            index[i, : len(members)] = members
            counts[i] = len(members)
        return cls(index, counts)

    def __len__(self) -> int:
        return int(self.index.shape[0])

    def __repr__(self) -> str:
        return f"NeighborLists({len(self)} queries, k_max={self.k_max}, k_mean={self.k_mean:.2f})"

    @property
    def mask(self) -> np.ndarray:
        return np.arange(self.k_max)[None, :] < self.counts[:, None]

    @property
    def safe_index(self) -> np.ndarray:
        """``index`` with the padding replaced by row 0, for gathering."""
        return np.where(self.mask, self.index, 0)

    @property
    def k_mean(self) -> float:
        return float(self.counts.mean()) if len(self) else 0.0

    def lists(self) -> List[np.ndarray]:
        return [self.index[i, : self.counts[i]].copy() for i in range(len(self))]

    def validate(self, n_rows: int) -> None:
        real = self.index[self.mask]
        if real.size and (real.min() < 0 or real.max() >= n_rows):
            raise DataError(f"neighbour index out of range for {n_rows} rows")


class HashGrid(object):
    """
    Arguments:
        points: (N, 2) coordinates in meters
        epsilon: ball radius, also the bucket size

    Attributes:
        points (np.ndarray): stored (N, 2) coordinates
        epsilon (float): cell size
        buckets (dict): integer cell ``(cx, cy)`` to ascending point indices
    """

    def __init__(self, points: np.ndarray, epsilon: float) -> None:
        if not epsilon > 0:
            raise UsageError(f"epsilon must be positive, got {epsilon}")
        points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        if not np.all(np.isfinite(points)):
            raise DataError("hash grid points must be finite")
        self.points = points
        self.epsilon = float(epsilon)
        self.cells = np.floor(points / self.epsilon).astype(np.int64)

        self.buckets: Dict[Tuple[int, int], List[int]] = {}
        for i, (cx, cy) in enumerate(self.cells.tolist()):
            self.buckets.setdefault((cx, cy), []).append(i)

        # CSR layout of the buckets for vectorised queries
        if len(points):
            self._lo = self.cells.min(axis=0) - 1
            self._span = self.cells.max(axis=0) - self._lo + 2
            keys = self._encode(self.cells)
            self._order = np.argsort(keys, kind="stable")
            sorted_keys = keys[self._order]
            self._keys, self._starts, self._counts = np.unique(
                sorted_keys, return_index=True, return_counts=True
            )
        logger.debug("hash grid: %d points in %d buckets", len(points), len(self.buckets))

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def _encode(self, cells: np.ndarray) -> np.ndarray:
        rel = cells - self._lo
        return rel[..., 0] * self._span[1] + rel[..., 1]

    def query_many(self, queries: np.ndarray, epsilon: float, k_max: int) -> NeighborLists:
        """
        Closed ε-ball members of every query, nearest first (ties by index),
        truncated to ``k_max``.
        """
        if not np.isclose(epsilon, self.epsilon, rtol=0.0, atol=1e-12):
            raise UsageError(f"query radius {epsilon} differs from cell size {self.epsilon}")
        if k_max < 1:
            raise UsageError(f"k_max must be at least 1, got {k_max}")
        queries = np.asarray(queries, dtype=np.float64).reshape(-1, 2)
        m = queries.shape[0]
        index = np.full((m, k_max), -1, dtype=np.int64)
        counts = np.zeros(m, dtype=np.int64)
        if m == 0 or len(self) == 0:
            return NeighborLists(index, counts)

        qcells = np.floor(queries / self.epsilon).astype(np.int64)
        probe = qcells[:, None, :] + _OFFSETS[None, :, :]  # (M, 9, 2)
        rel = probe - self._lo
        in_range = np.all((rel >= 0) & (rel < self._span), axis=2)
        keys = self._encode(probe)
        slot = np.searchsorted(self._keys, keys)
        slot = np.minimum(slot, len(self._keys) - 1)
        hit = in_range & (self._keys[slot] == keys)

        qid = np.broadcast_to(np.arange(m)[:, None], hit.shape)[hit]
        starts = self._starts[slot[hit]]
        sizes = self._counts[slot[hit]]
        total = int(sizes.sum())
        if total == 0:
            return NeighborLists(index, counts)
        cand_q = np.repeat(qid, sizes)
        within = np.arange(total) - np.repeat(np.cumsum(sizes) - sizes, sizes)
        cand = self._order[np.repeat(starts, sizes) + within]

        diff = self.points[cand] - queries[cand_q]
        d2 = diff[:, 0] * diff[:, 0] + diff[:, 1] * diff[:, 1]
        keep = d2 <= self.epsilon * self.epsilon
        cand_q, cand, d2 = cand_q[keep], cand[keep], d2[keep]

        order = np.lexsort((cand, d2, cand_q))
        cand_q, cand = cand_q[order], cand[order]
        first = np.searchsorted(cand_q, cand_q, side="left")
        rank = np.arange(cand_q.size) - first
        keep = rank < k_max
        index[cand_q[keep], rank[keep]] = cand[keep]
        counts = np.minimum(np.bincount(cand_q, minlength=m), k_max)
        return NeighborLists(index, counts)


def build(points: np.ndarray, epsilon: float) -> HashGrid:
    return HashGrid(points, epsilon)


def query_ball(
    index: HashGrid, q: Tuple[float, float], epsilon: float, k_max: int = 32
) -> List[int]:
    result = index.query_many(np.array([q], dtype=np.float64), epsilon, k_max)
    return [int(i) for i in result.lists()[0]]


def ball_mask(queries: np.ndarray, points: np.ndarray, epsilon: float) -> np.ndarray:
    """Dense (M, N) closed-ball membership, the brute-force counterpart of a query."""
    queries = np.asarray(queries, dtype=np.float64).reshape(-1, 2)
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    diff = queries[:, None, :] - points[None, :, :]
    d2 = diff[..., 0] * diff[..., 0] + diff[..., 1] * diff[..., 1]
    return d2 <= epsilon * epsilon
