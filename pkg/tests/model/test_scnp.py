import numpy as np
import pytest

from terranp.autodiff.gradcheck import grad_check
from terranp.autodiff.tensor import Tape, Tensor
from terranp.bev.grid import GridSpec
from terranp.core.configuration import ModelConfig
from terranp.core.exceptions import EmptySetError, ShapeError
from terranp.model.scnp import (
    HALF_LOG_2PI,
    ContextSet,
    LatentDist,
    PredictiveField,
    SemanticNP,
    TargetSet,
    gaussian_kl,
    gaussian_nll_terms,
)
from tests.conftest import SMALL


def model_config(**kwargs) -> ModelConfig:
    values = dict(SMALL["model"])
    values.update(kwargs)
    return ModelConfig(**values)


def sets(rng, config: ModelConfig, n_context: int = 20, n_targets: int = 30):
    fd = config.fused_dim
    context = ContextSet(
        rng.uniform(-4, 4, size=(n_context, 2)),
        rng.normal(size=n_context),
        rng.normal(size=(n_context, fd)),
    )
    targets = TargetSet(rng.uniform(-4, 4, size=(n_targets, 2)), rng.normal(size=(n_targets, fd)))
    return context, targets


def permuted(context: ContextSet, order: np.ndarray) -> ContextSet:
    return ContextSet(context.coords[order], context.heights[order], context.features.data[order])


class TestEncoders(object):
    def test_latent_is_permutation_invariant(self, rng):
        config = model_config()
        model = SemanticNP(config, 8, seed=1)
        context, _ = sets(rng, config)
        a = model.encode_latent(context)
        b = model.encode_latent(permuted(context, rng.permutation(len(context))))
        assert np.array_equal(a.mu.data, b.mu.data)
        assert np.array_equal(a.sigma.data, b.sigma.data)

    def test_deterministic_path_is_permutation_invariant(self, rng):
        config = model_config()
        model = SemanticNP(config, 8, seed=1)
        context, targets = sets(rng, config)
        a = model.encode_deterministic(context, targets)
        b = model.encode_deterministic(
            permuted(context, rng.permutation(len(context))), targets
        )
        assert np.array_equal(a.data, b.data)

    def test_empty_context_gives_null_rows(self, rng):
        config = model_config()
        model = SemanticNP(config, 8, seed=1)
        _, targets = sets(rng, config, n_targets=5)
        r = model.encode_deterministic(ContextSet.empty(config.fused_dim), targets)
        assert r.shape == (5, config.hidden)
        assert np.array_equal(r.data, np.tile(model.cross_attention.null.data, (5, 1)))

    def test_latent_needs_points(self):
        config = model_config()
        with pytest.raises(EmptySetError):
            SemanticNP(config, 8).encode_latent(ContextSet.empty(config.fused_dim))

    def test_sigma_floor(self, rng):
        config = model_config(sigma_min=0.25)
        model = SemanticNP(config, 8, seed=2)
        context, targets = sets(rng, config)
        q = model.encode_latent(context)
        _, sigma = model.decode(targets, model.encode_deterministic(context, targets), q.mu)
        assert np.all(q.sigma.data > 0.25)
        assert np.all(sigma.data > 0.25)

    def test_global_attention_mode(self, rng):
        ball = SemanticNP(model_config(epsilon=100.0, k_max=64), 8, seed=3)
        dense = SemanticNP(model_config(attention="global"), 8, seed=3)
        context, targets = sets(rng, model_config())
        a = ball.encode_deterministic(context, targets)
        b = dense.encode_deterministic(context, targets)
        assert np.allclose(a.data, b.data, rtol=0, atol=1e-10)


class TestFusion(object):
    def test_zero_input_gives_zero_features(self):
        model = SemanticNP(model_config(), 8, seed=1)
        fused = model.fuse_semantics(np.zeros((8, 6, 5)), np.zeros((6, 5)))
        assert fused.shape == (4, 6, 5)
        assert not fused.data.any()

    def test_cell_features(self, rng):
        model = SemanticNP(model_config(), 8, seed=1)
        fused = model.fuse_semantics(rng.normal(size=(8, 6, 5)), np.ones((6, 5)))
        rows = model.cell_features(fused, np.array([0, 7, 29]))
        assert np.array_equal(rows.data[1], fused.data[:, 1, 2])
        assert np.array_equal(rows.data[2], fused.data[:, 5, 4])

    def test_wrong_channels(self):
        model = SemanticNP(model_config(), 8)
        with pytest.raises(ShapeError):
            model.fuse_semantics(np.zeros((3, 4, 4)), np.zeros((4, 4)))


class TestObjective(object):
    def test_kl_of_identical_distributions(self, rng):
        q = LatentDist(Tensor(rng.normal(size=6)), Tensor(rng.uniform(0.1, 2.0, 6)))
        assert gaussian_kl(q, q).item() == 0.0

    def test_kl_of_shifted_mean(self):
        q = LatentDist(Tensor(np.ones(4)), Tensor(np.ones(4)))
        assert gaussian_kl(q, LatentDist.prior(4)).item() == pytest.approx(2.0)

    def test_nll_of_exact_mean(self, rng):
        h = rng.normal(size=25)
        nll = gaussian_nll_terms(h, Tensor(h), Tensor(np.ones(25))).sum().item()
        assert HALF_LOG_2PI == pytest.approx(0.9189385)
        assert nll == pytest.approx(0.9189385 * 25)

    def test_elbo_terms(self, rng):
        config = model_config()
        model = SemanticNP(config, 8, seed=5)
        context, targets = sets(rng, config)
        heights = rng.normal(size=len(targets))
        terms = model.elbo_loss(context, targets, heights, rng.standard_normal(config.z_dim))
        assert terms.loss.item() == pytest.approx(terms.nll.item() + terms.kl.item())
        assert terms.kl.item() >= 0.0

    def test_elbo_gradients(self, rng):
        config = model_config(hidden=4, heads=2, z_dim=2, fused_dim=2, k_max=4, epsilon=3.0)
        model = SemanticNP(config, 2, seed=6)
        semantics = rng.normal(size=(2, 4, 4))
        observed = (rng.uniform(size=(4, 4)) < 0.5).astype(np.float64)
        cells = np.arange(16)
        coords = np.stack([cells % 4 - 1.5, cells // 4 - 1.5], axis=1).astype(np.float64)
        heights = rng.normal(size=16)
        noise = rng.standard_normal(2)

        def loss():
            features = model.cell_features(model.fuse_semantics(semantics, observed), cells)
            context = ContextSet(coords[:6], heights[:6], features.gather(np.arange(6)))
            targets = TargetSet(coords, features)
            return model.elbo_loss(context, targets, heights, noise).loss

        assert grad_check(loss, model.parameters()) < 1e-3

    def test_height_count_mismatch(self, rng):
        config = model_config()
        model = SemanticNP(config, 8)
        context, targets = sets(rng, config)
        with pytest.raises(ShapeError):
            model.elbo_loss(context, targets, np.zeros(3), np.zeros(config.z_dim))

    def test_gradients_reach_every_parameter(self, rng):
        config = model_config()
        model = SemanticNP(config, 8, seed=5)
        semantics = rng.normal(size=(8, 6, 6))
        observed = np.ones((6, 6))
        cells = np.arange(36)
        coords = np.stack([cells % 6 * 0.5, cells // 6 * 0.5], axis=1).astype(np.float64)
        with Tape() as tape:
            features = model.cell_features(model.fuse_semantics(semantics, observed), cells)
            context = ContextSet(coords[::2], np.zeros(18), features.gather(np.arange(0, 36, 2)))
            loss = model.elbo_loss(
                context, TargetSet(coords, features), np.zeros(36), np.zeros(config.z_dim)
            ).loss
        grads = tape.backward(loss)
        for name, p in model.named_parameters():
            if name.endswith(".null"):
                continue
            assert np.any(tape.grad(grads, p)), name


class TestPredict(object):
    def test_seeded(self, rng):
        config = model_config()
        context, targets = sets(rng, config)
        a = SemanticNP(config, 8, seed=7).predict(context, targets, n_samples=3, seed=1)
        b = SemanticNP(config, 8, seed=7).predict(context, targets, n_samples=3, seed=1)
        assert np.array_equal(a.mean, b.mean)
        assert np.array_equal(a.std, b.std)

    def test_chunking_does_not_change_the_result(self, rng):
        context, targets = sets(rng, model_config())
        whole = SemanticNP(model_config(), 8, seed=7).predict(context, targets)
        chunked = SemanticNP(model_config(max_targets=7), 8, seed=7).predict(context, targets)
        assert np.allclose(whole.mean, chunked.mean, rtol=0, atol=1e-12)
        assert np.allclose(whole.std, chunked.std, rtol=0, atol=1e-12)

    def test_empty_context_uses_the_prior(self, rng):
        config = model_config()
        _, targets = sets(rng, config)
        field = SemanticNP(config, 8).predict(ContextSet.empty(config.fused_dim), targets)
        assert len(field) == len(targets)

    def test_nothing_to_condition_on(self):
        config = model_config()
        targets = TargetSet(np.zeros((3, 2)), np.zeros((3, config.fused_dim)))
        with pytest.raises(EmptySetError):
            SemanticNP(config, 8).predict(ContextSet.empty(config.fused_dim), targets)

    def test_bad_sample_count(self, rng):
        config = model_config()
        context, targets = sets(rng, config)
        with pytest.raises(ShapeError):
            SemanticNP(config, 8).predict(context, targets, n_samples=0)


class TestPredictiveField(object):
    def test_single_sample(self):
        field = PredictiveField.aggregate([np.array([1.0, 2.0])], [np.array([0.5, 0.5])])
        assert field.mean.tolist() == [1.0, 2.0]
        assert field.std.tolist() == [0.5, 0.5]

    def test_moment_matching(self):
        field = PredictiveField.aggregate(
            [np.array([0.0]), np.array([2.0])], [np.array([1.0]), np.array([1.0])], keep=True
        )
        assert field.mean[0] == 1.0
        assert field.std[0] == pytest.approx(np.sqrt(2.0))
        assert len(field.samples) == 2

    def test_to_grid(self):
        spec = GridSpec(0.0, 0.0, 1.0, 2, 2)
        mean, _ = PredictiveField(np.array([3.0]), np.array([0.1])).to_grid(np.array([2]), spec)
        assert mean[1, 0] == 3.0
        assert np.isnan(mean[0, 0])
