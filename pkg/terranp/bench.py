"""
Kernel-level comparison of ball-query and dense global attention: analytic
multiply-accumulates next to measured wall time.
"""
import logging
import time
from typing import List, NamedTuple, Optional

import numpy as np

from terranp.autodiff.tensor import Tensor
from terranp.bev.spatial import HashGrid
from terranp.core.configuration import BenchConfig, GridConfig
from terranp.model.attention import (
    ATTENTION_MODES,
    AttentionParams,
    attention_memory_mb,
    flops_count,
    multihead_bq,
    multihead_global,
)

logger = logging.getLogger(__name__)

BENCH_HEADER = ["mode", "M", "N", "k_mean", "D", "heads", "macs", "wall_ms"]


class BenchRow(NamedTuple):
    mode: str
    m: int
    n: int
    k_mean: float
    d: int
    heads: int
    macs: float
    wall_ms: float

    def row(self) -> List[str]:
        return [
            self.mode,
            str(self.m),
            str(self.n),
            f"{self.k_mean:.3f}",
            str(self.d),
            str(self.heads),
            f"{self.macs:.0f}",
            f"{self.wall_ms:.3f}",
        ]


def _median_ms(fn, repeats: int) -> float:  # type: ignore
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append((time.perf_counter() - start) * 1e3)
    return float(np.median(times))


def bench_attention(
    config: BenchConfig,
    grid: Optional[GridConfig] = None,
    seed: int = 0,
    modes: tuple = ATTENTION_MODES,
) -> List[BenchRow]:
    """
    Times one multihead layer per mode on ``n`` keys scattered at grid
    density (one point per ``resolution²``) and ``m`` queries placed on key
    positions, so every ball holds at least its own key.

    Global rows whose score tensors would exceed ``memory_budget_mb`` are
    logged and left out.
    """
    grid = grid or GridConfig()
    rng = np.random.default_rng(seed)
    side = grid.resolution * np.sqrt(config.n)
    key_xy = rng.uniform(0.0, side, size=(config.n, 2))
    query_xy = key_xy[rng.choice(config.n, size=config.m, replace=config.m > config.n)]
    d = config.hidden
    keys = Tensor(rng.standard_normal((config.n, d)))
    queries = Tensor(rng.standard_normal((config.m, d)))
    params = AttentionParams(d, config.heads, rng)

    neighbors = HashGrid(key_xy, config.radius).query_many(query_xy, config.radius, config.k_max)
    rows = []
    for mode in modes:
        if mode == "global":
            needed = attention_memory_mb(config.m, config.n, config.heads, "global")
            if needed > config.memory_budget_mb:
                logger.warning(
                    "skipping global attention: %.0f MiB needed, budget %.0f MiB",
                    needed,
                    config.memory_budget_mb,
                )
                continue
            mask = np.ones((config.m, config.n), dtype=bool)
            k_mean = float(config.n)
            wall = _median_ms(lambda: multihead_global(queries, keys, params, mask), config.repeats)
        else:
            k_mean = neighbors.k_mean
            wall = _median_ms(
                lambda: multihead_bq(queries, keys, params, neighbors), config.repeats
            )
        macs = flops_count(config.m, config.n, k_mean, d, config.heads, mode)
        row = BenchRow(mode, config.m, config.n, k_mean, d, config.heads, macs, wall)
        logger.info("%s attention: %.3g MACs, %.2f ms", mode, macs, wall)
        rows.append(row)
    return rows
