import numpy as np
import pytest

from terranp.bev.grid import ElevationGrid
from terranp.core.configuration import ModelConfig
from terranp.core.exceptions import EmptySetError, ShapeError
from terranp.model.sampling import sample_context_target
from tests.conftest import SMALL

CONFIG = ModelConfig(**SMALL["model"])


def grids(rng, shape=(20, 20), observed=0.4, valid=0.8):
    truth = rng.normal(size=shape)
    gt_valid = rng.uniform(size=shape) < valid
    seen = rng.uniform(size=shape) < observed
    context = ElevationGrid(truth + 0.01, seen)
    return context, ElevationGrid(truth, gt_valid)


class TestEvaluation(object):
    def test_every_observed_cell_is_context(self, rng):
        context, gt = grids(rng)
        sample = sample_context_target(context, gt, CONFIG, training=False)
        assert len(sample.context_cells) == context.valid.sum()
        assert len(sample.target_cells) == gt.valid.sum()
        assert np.allclose(sample.context_heights, context.values.reshape(-1)[sample.context_cells])

    def test_no_observation(self, rng):
        context, gt = grids(rng, observed=0.0)
        sample = sample_context_target(context, gt, CONFIG, training=False)
        assert len(sample.context_cells) == 0
        assert len(sample.target_cells) == gt.valid.sum()


class TestTraining(object):
    def test_context_is_part_of_the_targets(self, rng):
        context, gt = grids(rng)
        sample = sample_context_target(context, gt, CONFIG, rng)
        available = (context.valid & gt.valid).sum()
        assert CONFIG.min_context <= len(sample.context_cells) <= available
        assert np.all(np.isin(sample.context_cells, sample.target_cells))
        assert np.all(gt.valid.reshape(-1)[sample.target_cells])
        assert np.all(np.diff(sample.target_cells) > 0)

    def test_capped_by_available_cells(self, rng):
        context, gt = grids(rng, shape=(5, 5), observed=0.3)
        sample = sample_context_target(context, gt, CONFIG, rng)
        assert len(sample.context_cells) == (context.valid & gt.valid).sum()

    def test_target_budget(self, rng):
        context, gt = grids(rng, shape=(40, 40))
        sample = sample_context_target(context, gt, CONFIG, rng)
        assert len(sample.target_cells) == CONFIG.max_targets
        assert len(sample.context_cells) <= CONFIG.max_targets

    def test_context_never_outgrows_the_targets(self, rng):
        config = ModelConfig(**{**SMALL["model"], "min_context": 120, "max_context": 128})
        context, gt = grids(rng, shape=(40, 40), observed=0.9, valid=1.0)
        sample = sample_context_target(context, gt, config, rng)
        assert len(sample.context_cells) == config.max_targets
        assert np.array_equal(sample.context_cells, sample.target_cells)

    def test_seeded(self, rng):
        context, gt = grids(rng)
        a = sample_context_target(context, gt, CONFIG, np.random.default_rng(3))
        b = sample_context_target(context, gt, CONFIG, np.random.default_rng(3))
        assert np.array_equal(a.context_cells, b.context_cells)
        assert np.array_equal(a.target_cells, b.target_cells)


class TestErrors(object):
    @pytest.mark.parametrize("training", [True, False])
    def test_no_ground_truth(self, rng, training):
        context, _ = grids(rng)
        gt = ElevationGrid(np.zeros((20, 20)), np.zeros((20, 20), dtype=bool))
        with pytest.raises(EmptySetError):
            sample_context_target(context, gt, CONFIG, rng, training=training)

    def test_shape_mismatch(self, rng):
        context, _ = grids(rng)
        _, gt = grids(rng, shape=(4, 4))
        with pytest.raises(ShapeError):
            sample_context_target(context, gt, CONFIG, rng)
