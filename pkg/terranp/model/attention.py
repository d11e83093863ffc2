"""
Scaled dot-product attention restricted to ε-balls, its multihead form and
the dense masked attention it is checked against.

Neighbour lists are padded to ``k_max``; padded slots get a large negative
logit so their softmax weight underflows to exactly zero. Queries whose ball
is empty get the null-context embedding instead.
"""
import logging
from typing import Optional

import numpy as np

from terranp.autodiff.module import Module
from terranp.autodiff.tensor import Tensor
from terranp.bev.spatial import NeighborLists
from terranp.core.exceptions import ConfigurationError, EmptySetError, ShapeError
from terranp.model.layers import glorot

logger = logging.getLogger(__name__)

# finite stand-in for -inf logits
MASKED_LOGIT = -1e30

ATTENTION_MODES = ("ball", "global")


class AttentionParams(Module):
    """
    Projections of one multihead attention layer. ``W_q``, ``W_k`` and
    ``W_v`` are D×D; head ``h`` uses their column block
    ``[h·D/heads, (h+1)·D/heads)``.

    Arguments:
        dim: model width D
        heads: number of heads, must divide D
        null_context: ``learned`` for a trainable empty-ball embedding,
          ``zero`` for a constant zero vector
    """

    def __init__(
        self,
        dim: int,
        heads: int,
        rng: Optional[np.random.Generator] = None,
        null_context: str = "learned",
    ) -> None:
        super().__init__()
        if dim % heads:
            raise ConfigurationError(f"width {dim} isn't divisible by {heads} heads")
        if null_context not in ("learned", "zero"):
            raise ConfigurationError(f"null_context is learned or zero, got {null_context!r}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.dim = dim
        self.heads = heads
        self.w_q = self.param("w_q", glorot(rng, dim, dim, (dim, dim)))
        self.w_k = self.param("w_k", glorot(rng, dim, dim, (dim, dim)))
        self.w_v = self.param("w_v", glorot(rng, dim, dim, (dim, dim)))
        self.w_o = self.param("w_o", glorot(rng, dim, dim, (dim, dim)))
        if null_context == "learned":
            self.null = self.param("null", rng.normal(0.0, 0.1, dim))
        else:
            self.null = Tensor(np.zeros(dim))

    @classmethod
    def identity(cls, dim: int, heads: int = 1) -> "AttentionParams":
        params = cls(dim, heads)
        for w in (params.w_q, params.w_k, params.w_v, params.w_o):
            w.data = np.eye(dim)
        return params


def _blend_null(out: Tensor, has: np.ndarray, null: Optional[Tensor]) -> Tensor:
    """Rows with ``has`` keep ``out``, the others become ``null`` exactly."""
    if np.all(has):
        return out
    keep = has.astype(np.float64)[:, None]
    blended = out * keep
    if null is not None:
        blended = blended + null.reshape(1, out.shape[1]) * (1.0 - keep)
    return blended


def _tile(row: Tensor, m: int) -> Tensor:
    return row.reshape(1, row.shape[-1]).gather(np.zeros(m, dtype=np.int64))


def _ball_attend(
    q: Tensor, k: Tensor, v: Tensor, neighbors: NeighborLists, heads: int
) -> Tensor:
    m, d = q.shape
    n = k.shape[0]
    if k.shape[1] != d or v.shape != k.shape:
        raise ShapeError(f"attention shapes Q{q.shape} K{k.shape} V{v.shape} don't conform")
    if len(neighbors) != m:
        raise ShapeError(f"{len(neighbors)} neighbour lists for {m} queries")
    neighbors.validate(n)
    dh = d // heads
    kmax = neighbors.k_max
    idx = neighbors.safe_index.reshape(-1)
    kg = k.gather(idx).reshape(m, kmax, heads, dh).transpose(0, 2, 1, 3)
    vg = v.gather(idx).reshape(m, kmax, heads, dh).transpose(0, 2, 1, 3)
    scores = (kg @ q.reshape(m, heads, dh, 1)).reshape(m, heads, kmax) * (1.0 / np.sqrt(dh))
    bias = np.where(neighbors.mask, 0.0, MASKED_LOGIT)[:, None, :]
    weights = (scores + bias).softmax(axis=-1)
    return (weights.reshape(m, heads, 1, kmax) @ vg).reshape(m, d)


def bq_attention(
    q: Tensor,
    k: Tensor,
    v: Tensor,
    neighbors: NeighborLists,
    null: Optional[Tensor] = None,
) -> Tensor:
    """
    ``softmax(q_i K_Bᵀ / √D) V_B`` for every query over its ball ``B(q_i)``.
    Empty balls yield ``null`` (zeros when ``None``).
    """
    has = neighbors.counts > 0
    if not np.any(has) or k.shape[0] == 0:
        return _tile(null if null is not None else Tensor(np.zeros(q.shape[1])), q.shape[0])
    return _blend_null(_ball_attend(q, k, v, neighbors, heads=1), has, null)


def multihead_bq(
    queries: Tensor, keys: Tensor, params: AttentionParams, neighbors: NeighborLists
) -> Tensor:
    """
    Projects ``queries`` and ``keys`` (which double as values), attends per
    head over the same balls, concatenates the heads and applies ``W_o``.
    """
    m = queries.shape[0]
    has = neighbors.counts > 0
    if not np.any(has) or keys.shape[0] == 0:
        return _tile(params.null, m)
    q = queries @ params.w_q
    k = keys @ params.w_k
    v = keys @ params.w_v
    out = _ball_attend(q, k, v, neighbors, params.heads) @ params.w_o
    return _blend_null(out, has, params.null)


def global_attention_masked(
    q: Tensor, k: Tensor, v: Tensor, mask: np.ndarray, heads: int = 1
) -> Tensor:
    """
    Dense attention where ``mask[i, j]`` permits query ``i`` to see key ``j``.

    Raises:
        :obj:`terranp.core.exceptions.EmptySetError`: a query may see nothing
    """
    m, d = q.shape
    n = k.shape[0]
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (m, n):
        raise ShapeError(f"mask {mask.shape} doesn't match {m} queries and {n} keys")
    if not np.all(mask.any(axis=1)):
        raise EmptySetError("a query row has no permitted keys")
    dh = d // heads
    qh = q.reshape(m, heads, dh).transpose(1, 0, 2)
    kh = k.reshape(n, heads, dh).transpose(1, 2, 0)
    vh = v.reshape(n, heads, dh).transpose(1, 0, 2)
    bias = np.where(mask, 0.0, MASKED_LOGIT)[None, :, :]
    weights = ((qh @ kh) * (1.0 / np.sqrt(dh)) + bias).softmax(axis=-1)
    return (weights @ vh).transpose(1, 0, 2).reshape(m, d)


def multihead_global(
    queries: Tensor, keys: Tensor, params: AttentionParams, mask: np.ndarray
) -> Tensor:
    """:func:`multihead_bq` with a dense mask in place of neighbour lists."""
    m = queries.shape[0]
    mask = np.asarray(mask, dtype=bool)
    has = mask.any(axis=1)
    if not np.any(has) or keys.shape[0] == 0:
        return _tile(params.null, m)
    q = queries @ params.w_q
    k = keys @ params.w_k
    v = keys @ params.w_v
    safe = mask | ~has[:, None]
    out = global_attention_masked(q, k, v, safe, heads=params.heads) @ params.w_o
    return _blend_null(out, has, params.null)


def flops_count(m: int, n: int, k_mean: float, d: int, heads: int, mode: str) -> float:
    """
    Multiply-accumulates of one multihead attention layer: projections
    ``3·N·D² + M·D²``, output ``M·D²`` and scores plus weighted sum
    ``2·M·N·D`` (global) or ``2·M·k_mean·D`` (ball). Heads split D and
    don't change the count.
    """
    if mode not in ATTENTION_MODES:
        raise ConfigurationError(f"mode is ball or global, got {mode!r}")
    if min(m, n, k_mean, d, heads) <= 0:
        raise ConfigurationError("sizes must be positive")
    projections = 3 * n * d * d + m * d * d
    output = m * d * d
    span = n if mode == "global" else k_mean
    return float(projections + output + 2 * m * span * d)


def attention_memory_mb(m: int, n: int, heads: int, mode: str, k_max: int = 32) -> float:
    """Rough peak size of the score tensors of one forward pass, MiB."""
    span = n if mode == "global" else k_max
    # scores, exponentials and softmax output
    return 3 * 8 * heads * m * span / 2**20
