import numpy as np
import pytest

from terranp.bev.grid import ElevationGrid, GridSpec
from terranp.core.exceptions import EmptySetError, ShapeError
from terranp.metrics.report import (
    METRICS_CSV_HEADER,
    EvalReport,
    baseline_columns,
    baseline_header,
    evaluate_field,
    wide_columns,
)

SPEC = GridSpec(origin_x=0.0, origin_y=0.0, resolution=1.0, height=6, width=6)


def gt_grid(rng) -> ElevationGrid:
    return ElevationGrid(rng.normal(size=SPEC.shape), np.ones(SPEC.shape, dtype=bool))


class TestEvaluateField(object):
    def test_exact(self, rng):
        gt = gt_grid(rng)
        observed = np.zeros(SPEC.shape, dtype=bool)
        observed[:2] = True
        report = evaluate_field(gt.values, np.ones(SPEC.shape), gt, observed, SPEC, "f")
        assert report.value("elevation_mae") == 0.0
        assert report.value("slope_mae") == 0.0
        assert report.value("curvature_mae") == 0.0
        assert report.value("nll") == pytest.approx(0.9189385, abs=1e-6)
        assert report.count() == 36
        assert report.count("elevation_mae", "observed") == 12

    def test_unpredicted_cells_are_skipped(self, rng):
        gt = gt_grid(rng)
        mean = gt.values + 1.0
        mean[0, 0] = np.nan
        report = evaluate_field(mean, np.ones(SPEC.shape), gt, gt.valid, SPEC)
        assert report.count() == 35
        assert report.value("elevation_mae") == pytest.approx(1.0)

    def test_shape(self, rng):
        with pytest.raises(ShapeError):
            evaluate_field(np.zeros((2, 2)), np.ones((2, 2)), gt_grid(rng), np.ones((6, 6)), SPEC)


class TestEvalReport(object):
    def test_rows(self, rng):
        gt = gt_grid(rng)
        report = evaluate_field(gt.values + 0.5, np.ones(SPEC.shape), gt, gt.valid, SPEC)
        rows = report.rows()
        assert all(len(row) == len(METRICS_CSV_HEADER) for row in rows)
        assert ["elevation_mae", "total", "0.500000", "36"] in rows
        assert ["elevation_mae", "observed", "0.500000", "36"] in rows
        # nothing unobserved
        assert not [r for r in rows if r[1] == "unobserved"]
        assert [r[0] for r in rows][-2:] == ["nll", "ence"]

    def test_merge_pools_cells(self, rng):
        gt = gt_grid(rng)
        a = evaluate_field(gt.values + 1.0, np.ones(SPEC.shape), gt, gt.valid, SPEC, "a")
        b = evaluate_field(gt.values + 3.0, np.ones(SPEC.shape), gt, gt.valid, SPEC, "b")
        merged = EvalReport.merge([a, b])
        assert merged.name == "aggregate"
        assert merged.value("elevation_mae") == pytest.approx(2.0)
        assert merged.count() == 72
        assert len(merged.std) == 72

    def test_merge_nothing(self):
        with pytest.raises(EmptySetError):
            EvalReport.merge([])

    def test_wide(self, rng):
        gt = gt_grid(rng)
        report = evaluate_field(gt.values, np.ones(SPEC.shape), gt, gt.valid, SPEC, "s000f0001")
        row = report.wide()
        assert list(row) == wide_columns()
        assert row["frame"] == "s000f0001"
        assert row["elevation_mae_unobserved"] == ""
        assert row["cells"] == "36"


class TestBaselineColumns(object):
    def test_missing_baseline(self):
        assert baseline_columns("gp", None) == {}

    def test_columns(self, rng):
        gt = gt_grid(rng)
        report = evaluate_field(gt.values, np.ones(SPEC.shape), gt, gt.valid, SPEC)
        columns = baseline_columns("gp", report)
        assert list(columns) == baseline_header("gp")
        assert columns["gp_elev_mae"] == "0.000000"
