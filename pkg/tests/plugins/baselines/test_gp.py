import numpy as np
import pytest

from terranp.core.exceptions import (
    ConfigurationError,
    EmptySetError,
    FactorizationError,
    UsageError,
)
from terranp.plugins.baselines import GPBaseline
from terranp.plugins.baselines.gp import (
    KernelSpec,
    cholesky_with_jitter,
    gp_fit_predict,
    rq_kernel,
)


def dense_posterior(xc, hc, xt, kernel):
    offset = hc.mean()
    k = rq_kernel(xc, xc, kernel) + kernel.noise * np.eye(len(xc))
    ks = rq_kernel(xt, xc, kernel)
    mean = ks @ np.linalg.solve(k, hc - offset) + offset
    var = 1.0 - np.einsum("ij,ji->i", ks, np.linalg.solve(k, ks.T)) + kernel.noise
    return mean, np.sqrt(var)


class TestKernel(object):
    def test_unit_on_the_diagonal(self, rng):
        x = rng.uniform(-5, 5, size=(10, 2))
        assert np.allclose(np.diag(rq_kernel(x, x, KernelSpec())), 1.0)

    def test_decays_with_distance(self):
        x = np.array([[0.5, 0.0], [1.0, 0.0], [3.0, 0.0]])
        k = rq_kernel(np.zeros((1, 2)), x, KernelSpec())
        assert 1.0 > k[0, 0] > k[0, 1] > k[0, 2] > 0.0

    def test_anisotropic_lengthscale(self):
        kernel = KernelSpec(lengthscale=(1.0, 4.0))
        k = rq_kernel(np.zeros((1, 2)), np.array([[1.0, 0.0], [0.0, 1.0]]), kernel)
        assert k[0, 1] > k[0, 0]

    @pytest.mark.parametrize(
        "kwargs", [{"lengthscale": (0.0, 1.0)}, {"lengthscale": (1.0,)}, {"alpha": 0}, {"noise": 0}]
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigurationError):
            KernelSpec(**kwargs)


class TestCholesky(object):
    def test_jitter_rescues_a_singular_matrix(self):
        _, jitter = cholesky_with_jitter(np.ones((3, 3)))
        assert jitter == 1e-8

    def test_no_jitter_when_not_needed(self):
        _, jitter = cholesky_with_jitter(np.eye(3))
        assert jitter == 0.0

    def test_gives_up(self):
        with pytest.raises(FactorizationError):
            cholesky_with_jitter(-np.eye(3))


class TestPredict(object):
    def test_interpolates_the_context(self, rng):
        xc = rng.uniform(-5, 5, size=(30, 2))
        hc = np.sin(xc[:, 0]) + 0.3 * xc[:, 1]
        field = gp_fit_predict(xc, hc, xc, KernelSpec(noise=1e-8))
        assert np.max(np.abs(field.mean - hc)) < 1e-3

    def test_matches_a_dense_solve(self, rng):
        kernel = KernelSpec(lengthscale=(0.9, 1.3), alpha=2.0, noise=1e-2)
        xc = rng.uniform(-3, 3, size=(40, 2))
        hc = rng.normal(size=40)
        xt = rng.uniform(-4, 4, size=(25, 2))
        field = gp_fit_predict(xc, hc, xt, kernel)
        mean, std = dense_posterior(xc, hc, xt, kernel)
        assert np.allclose(field.mean, mean, atol=1e-8)
        assert np.allclose(field.std, std, atol=1e-8)

    def test_far_away_reverts_to_the_context_mean(self):
        xc = np.array([[0.0, 0.0], [0.5, 0.0]])
        field = gp_fit_predict(xc, np.array([1.0, 3.0]), np.array([[1e4, 1e4]]))
        assert field.mean[0] == pytest.approx(2.0)
        assert field.std[0] == pytest.approx(np.sqrt(1.0 + 1e-4))

    def test_sigma_floor(self):
        xc = np.zeros((1, 2))
        field = gp_fit_predict(xc, np.ones(1), xc, KernelSpec(noise=1e-12), sigma_min=0.01)
        assert field.std[0] == 0.01

    def test_no_targets(self):
        field = gp_fit_predict(np.zeros((1, 2)), np.ones(1), np.empty((0, 2)))
        assert len(field) == 0

    def test_empty_context(self):
        with pytest.raises(EmptySetError):
            gp_fit_predict(np.empty((0, 2)), np.empty(0), np.zeros((1, 2)))

    def test_too_much_context(self):
        with pytest.raises(UsageError):
            gp_fit_predict(np.zeros((4001, 2)), np.zeros(4001), np.zeros((1, 2)))


class TestGPBaseline(object):
    def test_subsampling_is_seeded(self, rng):
        xc = rng.uniform(-5, 5, size=(200, 2))
        hc = rng.normal(size=200)
        xt = rng.uniform(-5, 5, size=(10, 2))
        a = GPBaseline(max_context=20, seed=4).predict(xc, hc, xt)
        b = GPBaseline(max_context=20, seed=4).predict(xc, hc, xt)
        full = GPBaseline(seed=4).predict(xc, hc, xt)
        assert np.array_equal(a.mean, b.mean)
        assert not np.allclose(a.mean, full.mean)

    @pytest.mark.parametrize("max_context", [0, 4001])
    def test_invalid_budget(self, max_context):
        with pytest.raises(ConfigurationError):
            GPBaseline(max_context=max_context)
