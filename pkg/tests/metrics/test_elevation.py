import numpy as np
import pytest

from terranp.bev.grid import ElevationGrid, GridSpec
from terranp.core.exceptions import EmptySetError, ShapeError
from terranp.metrics.elevation import (
    Stat,
    axis_slopes,
    curvature_mae,
    laplacian,
    mae_split,
    slope_mae,
)

SPEC = GridSpec(origin_x=0.0, origin_y=0.0, resolution=0.5, height=12, width=10)
XS, YS = np.meshgrid(np.arange(SPEC.width) * 0.5, np.arange(SPEC.height) * 0.5)


def full(values: np.ndarray) -> ElevationGrid:
    return ElevationGrid(values, np.ones(values.shape, dtype=bool))


FLAT = full(np.zeros(SPEC.shape))
NOTHING_SEEN = np.zeros(SPEC.shape, dtype=bool)


class TestMAE(object):
    def test_exact_prediction(self, rng):
        gt = full(rng.normal(size=SPEC.shape))
        assert mae_split(gt, gt, NOTHING_SEEN).total == 0.0

    def test_unit_offset(self, rng):
        values = rng.normal(size=SPEC.shape)
        observed = rng.uniform(size=SPEC.shape) < 0.5
        splits = mae_split(full(values + 1.0), full(values), observed)
        assert splits.total == pytest.approx(1.0)
        assert splits.observed == pytest.approx(1.0)
        assert splits.unobserved == pytest.approx(1.0)

    def test_splits(self):
        observed = np.zeros(SPEC.shape, dtype=bool)
        observed[:, :5] = True
        pred = np.where(observed, 1.0, 3.0)
        splits = mae_split(full(pred), FLAT, observed)
        assert splits.observed == 1.0
        assert splits.unobserved == 3.0
        assert splits.total == 2.0

    def test_empty_split_is_none(self):
        splits = mae_split(FLAT, FLAT, NOTHING_SEEN)
        assert splits.observed is None
        assert splits.unobserved == 0.0

    def test_only_gt_valid_cells_count(self):
        valid = np.zeros(SPEC.shape, dtype=bool)
        valid[0, 0] = True
        gt = ElevationGrid(np.zeros(SPEC.shape), valid)
        pred = full(np.where(valid, 2.0, 100.0))
        assert mae_split(pred, gt, NOTHING_SEEN).total == 2.0

    def test_no_ground_truth(self):
        gt = ElevationGrid(np.zeros(SPEC.shape), NOTHING_SEEN)
        with pytest.raises(EmptySetError):
            mae_split(FLAT, gt, NOTHING_SEEN)

    def test_shapes(self):
        with pytest.raises(ShapeError):
            mae_split(FLAT, full(np.zeros((3, 3))), NOTHING_SEEN)


class TestSlope(object):
    def test_plane(self):
        slopes, ok = axis_slopes(full(0.1 * XS), SPEC.resolution, axis=1)
        assert ok.all()
        assert np.allclose(slopes, 10.0)
        slopes, _ = axis_slopes(full(0.1 * XS), SPEC.resolution, axis=0)
        assert np.allclose(slopes, 0.0)

    def test_constant_field(self):
        splits = slope_mae(full(np.full(SPEC.shape, 4.0)), FLAT, SPEC, NOTHING_SEEN)
        assert splits.total == 0.0

    def test_tilted_prediction(self):
        # the x axis is off by 10 %, the y axis is exact
        splits = slope_mae(full(0.1 * XS), FLAT, SPEC, NOTHING_SEEN)
        assert splits.total == pytest.approx(5.0)

    def test_hole_breaks_the_stencil(self):
        valid = np.ones(SPEC.shape, dtype=bool)
        valid[4, 4] = False
        _, ok = axis_slopes(ElevationGrid(np.zeros(SPEC.shape), valid), SPEC.resolution, 1)
        assert not ok[4, 3] and not ok[4, 5]
        assert ok[4, 4]


class TestCurvature(object):
    def test_paraboloid(self):
        lap, ok = laplacian(full((XS**2 + YS**2) / 2.0), SPEC.resolution)
        assert np.allclose(lap[ok], 2.0)
        assert not ok[0].any() and not ok[:, -1].any()
        assert ok[1:-1, 1:-1].all()

    def test_against_flat(self):
        splits = curvature_mae(full((XS**2 + YS**2) / 2.0), FLAT, SPEC, NOTHING_SEEN)
        assert splits.total == pytest.approx(2.0)


class TestStat(object):
    def test_pooling(self):
        pooled = Stat.of(np.array([1.0, 3.0])) + Stat.of(np.array([5.0]))
        assert pooled.mean == 3.0
        assert Stat().mean is None
