"""
Exact Gaussian-process regression of heights over BEV coordinates with a
rational-quadratic kernel.
"""
import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from terranp.core.exceptions import (
    ConfigurationError,
    EmptySetError,
    FactorizationError,
    UsageError,
)
from terranp.model.scnp import PredictiveField

logger = logging.getLogger(__name__)

JITTERS = (0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)
MAX_CONTEXT = 4000
TARGET_CHUNK = 4096


class KernelSpec(object):
    """
    Arguments:
        lengthscale: Θ per coordinate, meters
        alpha: rational-quadratic shape
        noise: observation noise variance σ_n²
    """

    __slots__ = ("lengthscale", "alpha", "noise")

    def __init__(
        self,
        lengthscale: Sequence[float] = (0.7, 0.7),
        alpha: float = 10.0,
        noise: float = 1e-4,
    ) -> None:
        self.lengthscale = np.asarray(lengthscale, dtype=np.float64).reshape(-1)
        self.alpha = float(alpha)
        self.noise = float(noise)
        if self.lengthscale.size != 2 or np.any(self.lengthscale <= 0):
            raise ConfigurationError(f"lengthscale must be two positive reals, got {lengthscale}")
        if self.alpha <= 0 or self.noise <= 0:
            raise ConfigurationError("alpha and noise must be positive")

    def __repr__(self) -> str:
        return f"KernelSpec(Θ={self.lengthscale.tolist()}, α={self.alpha}, σn²={self.noise})"


def rq_kernel(x1: np.ndarray, x2: np.ndarray, kernel: KernelSpec) -> np.ndarray:
    """``(1 + (x1 - x2)ᵀ Θ⁻² (x1 - x2) / 2α)^-α`` for every pair of rows."""
    a = np.asarray(x1, dtype=np.float64).reshape(-1, 2) / kernel.lengthscale
    b = np.asarray(x2, dtype=np.float64).reshape(-1, 2) / kernel.lengthscale
    d0 = a[:, None, 0] - b[None, :, 0]
    d1 = a[:, None, 1] - b[None, :, 1]
    r2 = d0 * d0 + d1 * d1
    return (1.0 + r2 / (2.0 * kernel.alpha)) ** (-kernel.alpha)


def cholesky_with_jitter(k: np.ndarray) -> Tuple[Tuple[np.ndarray, bool], float]:
    """
    Factorises ``k``, adding the smallest jitter of :data:`JITTERS` that
    makes it work.

    Raises:
        :obj:`terranp.core.exceptions.FactorizationError`: nothing worked
    """
    eye = np.eye(len(k))
    for jitter in JITTERS:
        try:
            factor = linalg.cho_factor(k + jitter * eye, lower=True, check_finite=False)
        except linalg.LinAlgError:
            logger.debug("Cholesky failed with jitter %g", jitter)
            continue
        if jitter:
            logger.info("Cholesky needed jitter %g", jitter)
        return factor, jitter
    raise FactorizationError(f"Gram matrix not positive definite even with jitter {JITTERS[-1]}")


def gp_fit_predict(
    context_coords: np.ndarray,
    context_heights: np.ndarray,
    target_coords: np.ndarray,
    kernel: Optional[KernelSpec] = None,
    sigma_min: float = 1e-3,
) -> PredictiveField:
    """
    Posterior of a GP with constant mean (the context mean height) at the
    targets. The predictive σ includes the observation noise and is floored
    at ``sigma_min``.

    Raises:
        :obj:`terranp.core.exceptions.EmptySetError`: empty context
        :obj:`terranp.core.exceptions.UsageError`: more than 4,000 context points
        :obj:`terranp.core.exceptions.FactorizationError`: see :func:`cholesky_with_jitter`
    """
    kernel = kernel or KernelSpec()
    xc = np.asarray(context_coords, dtype=np.float64).reshape(-1, 2)
    hc = np.asarray(context_heights, dtype=np.float64).reshape(-1)
    xt = np.asarray(target_coords, dtype=np.float64).reshape(-1, 2)
    if len(xc) == 0:
        raise EmptySetError("GP needs at least one context point")
    if len(xc) > MAX_CONTEXT:
        raise UsageError(f"{len(xc)} context points exceed the dense solve budget of {MAX_CONTEXT}")

    offset = float(hc.mean())
    k = rq_kernel(xc, xc, kernel)
    k[np.diag_indices_from(k)] += kernel.noise
    factor, _ = cholesky_with_jitter(k)
    weights = linalg.cho_solve(factor, hc - offset, check_finite=False)
    lower = factor[0]

    means, stds = [], []
    for lo in range(0, len(xt), TARGET_CHUNK):
        ks = rq_kernel(xt[lo : lo + TARGET_CHUNK], xc, kernel)
        means.append(ks @ weights + offset)
        v = linalg.solve_triangular(lower, ks.T, lower=True, check_finite=False)
        var = np.maximum(1.0 - np.sum(v * v, axis=0), 0.0) + kernel.noise
        stds.append(np.maximum(np.sqrt(var), sigma_min))
    if not means:
        return PredictiveField(np.empty(0), np.empty(0))
    return PredictiveField(np.concatenate(means), np.concatenate(stds))


class GPBaseline:
    """
    Exact GP baseline. Contexts larger than ``max_context`` are uniformly
    subsampled with a generator seeded by ``seed``.
    """

    def __init__(
        self,
        max_context: int = MAX_CONTEXT,
        lengthscale: Sequence[float] = (0.7, 0.7),
        alpha: float = 10.0,
        noise: float = 1e-4,
        sigma_min: float = 1e-3,
        seed: int = 0,
    ) -> None:
        if not 1 <= max_context <= MAX_CONTEXT:
            raise ConfigurationError(f"max_context must lie in [1, {MAX_CONTEXT}]")
        self.kernel = KernelSpec(lengthscale, alpha, noise)
        self.max_context = max_context
        self.sigma_min = sigma_min
        self.seed = seed

    def __repr__(self) -> str:
        return f"GPBaseline({self.kernel!r}, max_context={self.max_context})"

    def predict(
        self, context_coords: np.ndarray, context_heights: np.ndarray, target_coords: np.ndarray
    ) -> PredictiveField:
        xc = np.asarray(context_coords, dtype=np.float64).reshape(-1, 2)
        hc = np.asarray(context_heights, dtype=np.float64).reshape(-1)
        if len(xc) > self.max_context:
            rng = np.random.default_rng(self.seed)
            keep = np.sort(rng.choice(len(xc), size=self.max_context, replace=False))
            logger.debug("GP context subsampled from %d to %d", len(xc), self.max_context)
            xc, hc = xc[keep], hc[keep]
        return gp_fit_predict(xc, hc, target_coords, self.kernel, self.sigma_min)
