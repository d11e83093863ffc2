import pytest

from terranp.bench import BENCH_HEADER, BenchRow, bench_attention
from terranp.core.configuration import BenchConfig
from terranp.core.exceptions import ConfigurationError
from terranp.model.attention import flops_count


def config(**kwargs) -> BenchConfig:
    values = {"m": 64, "n": 128, "radius": 1.0, "k_max": 16, "hidden": 8, "heads": 2, "repeats": 1}
    values.update(kwargs)
    return BenchConfig(**values)


class Test(object):
    def test_rows(self):
        rows = bench_attention(config(), seed=3)
        assert [r.mode for r in rows] == ["ball", "global"]
        ball, dense = rows
        assert 1.0 <= ball.k_mean <= 16.0
        assert dense.k_mean == 128.0
        assert ball.macs < dense.macs
        assert dense.macs == flops_count(64, 128, 128.0, 8, 2, "global")
        assert all(r.wall_ms >= 0.0 for r in rows)

    def test_one_query_one_key(self):
        ball, dense = bench_attention(config(m=1, n=1), seed=0)
        assert ball.k_mean == 1.0
        assert ball.macs == dense.macs

    def test_seeded_neighbourhoods(self):
        a = bench_attention(config(), seed=9, modes=("ball",))
        b = bench_attention(config(), seed=9, modes=("ball",))
        assert a[0].k_mean == b[0].k_mean

    def test_global_over_budget_is_skipped(self):
        rows = bench_attention(config(memory_budget_mb=1e-6), seed=0)
        assert [r.mode for r in rows] == ["ball"]

    def test_row(self):
        row = BenchRow("ball", 4, 8, 2.5, 16, 4, 1234.0, 0.12345).row()
        assert len(row) == len(BENCH_HEADER)
        assert row == ["ball", "4", "8", "2.500", "16", "4", "1234", "0.123"]

    def test_invalid(self):
        with pytest.raises(ConfigurationError):
            bench_attention(config(hidden=6, heads=4))
