"""
Semantic-conditioned attentive neural process over BEV cells.

The model has three learned parts:

* a fusion network turning the raw semantic grid (plus the observed mask)
  into per-cell features: a dilated three layer "inpainting" path added to a
  single layer shallow path,
* a deterministic path: context self-attention followed by target to context
  cross-attention, both restricted to ε-balls in BEV meters,
* a latent path: per point embedding, ball self-attention, mean pooling and
  a diagonal Gaussian over the global latent ``z``.

A Gaussian decoder maps ``(target embedding, r_j, z)`` to a mean and a
standard deviation per target cell.
"""
import logging
from typing import List, NamedTuple, Optional, Tuple, Union

import numpy as np

from terranp.autodiff.module import Module
from terranp.autodiff.tensor import Tensor, concat
from terranp.bev.grid import GridSpec
from terranp.bev.spatial import HashGrid, NeighborLists
from terranp.core.configuration import ModelConfig
from terranp.core.exceptions import EmptySetError, NonFiniteError, ShapeError
from terranp.model.attention import AttentionParams, multihead_bq, multihead_global
from terranp.model.layers import MLP, Conv2d, Linear

logger = logging.getLogger(__name__)

HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)

Features = Union[Tensor, np.ndarray]


class ContextSet(object):
    """
    Cells with an observed height.

    Attributes:
        coords (np.ndarray): (C, 2) ego-frame cell centres, meters
        heights (np.ndarray): (C,) observed heights, meters
        features (Tensor): (C, D_f') fused semantic features
    """

    __slots__ = ("coords", "heights", "features")

    def __init__(self, coords: np.ndarray, heights: np.ndarray, features: Features) -> None:
        self.coords = np.asarray(coords, dtype=np.float64).reshape(-1, 2)
        self.heights = np.asarray(heights, dtype=np.float64).reshape(-1)
        self.features = features if isinstance(features, Tensor) else Tensor(features)
        if not (len(self.coords) == len(self.heights) == self.features.shape[0]):
            raise ShapeError(
                f"context rows disagree: {len(self.coords)} coords, "
                f"{len(self.heights)} heights, {self.features.shape[0]} features"
            )
        if not np.all(np.isfinite(self.heights)):
            raise NonFiniteError("context heights must be finite")

    def __len__(self) -> int:
        return len(self.coords)

    def __repr__(self) -> str:
        return f"ContextSet({len(self)} points)"

    @classmethod
    def empty(cls, feature_dim: int) -> "ContextSet":
        return cls(np.empty((0, 2)), np.empty(0), np.zeros((0, feature_dim)))

    def canonical(self) -> "ContextSet":
        """Rows sorted by x, then y, then height."""
        if len(self) < 2:
            return self
        order = np.lexsort((self.heights, self.coords[:, 1], self.coords[:, 0]))
        if np.all(order == np.arange(len(order))):
            return self
        return ContextSet(self.coords[order], self.heights[order], self.features.gather(order))


class TargetSet(object):
    """
    Cells to predict.

    Attributes:
        coords (np.ndarray): (T, 2) ego-frame cell centres, meters
        features (Tensor): (T, D_f') fused semantic features
    """

    __slots__ = ("coords", "features")

    def __init__(self, coords: np.ndarray, features: Features) -> None:
        self.coords = np.asarray(coords, dtype=np.float64).reshape(-1, 2)
        self.features = features if isinstance(features, Tensor) else Tensor(features)
        if len(self.coords) != self.features.shape[0]:
            raise ShapeError(
                f"target rows disagree: {len(self.coords)} coords, "
                f"{self.features.shape[0]} features"
            )

    def __len__(self) -> int:
        return len(self.coords)

    def __repr__(self) -> str:
        return f"TargetSet({len(self)} points)"

    def slice(self, lo: int, hi: int) -> "TargetSet":
        return TargetSet(self.coords[lo:hi], self.features.gather(np.arange(lo, hi)))

    def with_heights(self, heights: np.ndarray) -> ContextSet:
        return ContextSet(self.coords, heights, self.features)


class LatentDist(NamedTuple):
    mu: Tensor
    sigma: Tensor

    @classmethod
    def prior(cls, z_dim: int) -> "LatentDist":
        return cls(Tensor(np.zeros(z_dim)), Tensor(np.ones(z_dim)))


class ElboTerms(NamedTuple):
    loss: Tensor
    nll: Tensor
    kl: Tensor


class PredictiveField(object):
    """
    Per-target Gaussian prediction.

    Attributes:
        mean (np.ndarray): (T,) predicted heights, meters
        std (np.ndarray): (T,) predictive standard deviations, meters
        samples (list): one (T,) mean field per latent draw, when retained
    """

    __slots__ = ("mean", "std", "samples")

    def __init__(
        self, mean: np.ndarray, std: np.ndarray, samples: Optional[List[np.ndarray]] = None
    ) -> None:
        self.mean = np.asarray(mean, dtype=np.float64).reshape(-1)
        self.std = np.asarray(std, dtype=np.float64).reshape(-1)
        if self.mean.shape != self.std.shape:
            raise ShapeError(f"mean {self.mean.shape} and std {self.std.shape} disagree")
        if not (np.all(np.isfinite(self.mean)) and np.all(np.isfinite(self.std))):
            raise NonFiniteError("predictive field has non-finite values")
        self.samples = samples or []

    def __len__(self) -> int:
        return len(self.mean)

    def __repr__(self) -> str:
        return f"PredictiveField({len(self)} targets, {len(self.samples)} samples)"

    @classmethod
    def aggregate(
        cls, means: List[np.ndarray], stds: List[np.ndarray], keep: bool = False
    ) -> "PredictiveField":
        """
        Moment matching over latent draws: mean of the means and
        ``σ² = mean(σ_s²) + var(μ_s)``.
        """
        mu = np.stack(means)
        var = np.stack(stds) ** 2
        mean = mu.mean(axis=0)
        total = var.mean(axis=0) + mu.var(axis=0)
        return cls(mean, np.sqrt(total), [m.copy() for m in means] if keep else None)

    def to_grid(self, cells: np.ndarray, spec: GridSpec) -> Tuple[np.ndarray, np.ndarray]:
        """Scatters mean and std into (H, W) rasters, NaN elsewhere."""
        mean = np.full(spec.size, np.nan)
        std = np.full(spec.size, np.nan)
        mean[cells] = self.mean
        std[cells] = self.std
        return mean.reshape(spec.shape), std.reshape(spec.shape)


def gaussian_kl(q: LatentDist, p: LatentDist) -> Tensor:
    """Closed-form ``KL(q ‖ p)`` of diagonal Gaussians, summed over dimensions."""
    log_q = q.sigma.log()
    log_p = p.sigma.log()
    d = q.mu - p.mu
    terms = (
        (log_p - log_q)
        + ((log_q - log_p) * 2.0).exp() * 0.5
        + d * d * (log_p * -2.0).exp() * 0.5
        - 0.5
    )
    return terms.sum()


def gaussian_nll_terms(heights: np.ndarray, mu: Tensor, sigma: Tensor) -> Tensor:
    """``½ln(2π) + ln σ + (h - μ)² / (2σ²)`` per target."""
    log_sigma = sigma.log()
    d = mu - np.asarray(heights, dtype=np.float64)
    return d * d * (log_sigma * -2.0).exp() * 0.5 + log_sigma + HALF_LOG_2PI


class SemanticNP(Module):
    """
    Arguments:
        config: model hyperparameters
        feature_dim: raw semantic channels D_f
        seed: initialisation seed
    """

    def __init__(self, config: ModelConfig, feature_dim: int, seed: int = 0) -> None:
        super().__init__()
        rng = np.random.default_rng(seed)
        self.config = config
        self.feature_dim = feature_dim
        d, fd, zd = config.hidden, config.fused_dim, config.z_dim
        c_in = feature_dim + 1

        self.deep: List[Conv2d] = [
            self.child("fusion.deep.0", Conv2d(c_in, d, rng, dilation=1)),
            self.child("fusion.deep.1", Conv2d(d, d, rng, dilation=2)),
            self.child("fusion.deep.2", Conv2d(d, fd, rng, dilation=4)),
        ]
        self.shallow = self.child("fusion.shallow", Conv2d(c_in, fd, rng))

        def attention() -> AttentionParams:
            return AttentionParams(d, config.heads, rng, null_context=config.null_context)

        self.context_embed = self.child("det.context_embed", MLP([3 + fd, d, d], rng))
        self.target_embed = self.child("det.target_embed", MLP([2 + fd, d, d], rng))
        self.self_attention = self.child("det.self", attention())
        self.cross_attention = self.child("det.cross", attention())

        self.latent_embed = self.child("latent.embed", MLP([3 + fd, d, d], rng))
        self.latent_attention = self.child("latent.self", attention())
        self.latent_mlp = self.child(
            "latent.mlp", MLP([d, d, d], rng, final_activation=True)
        )
        self.latent_mu = self.child("latent.mu", Linear(d, zd, rng))
        self.latent_sigma = self.child("latent.sigma", Linear(d, zd, rng))

        self.decoder = self.child(
            "decoder.mlp", MLP([d + d + zd, d, d], rng, final_activation=True)
        )
        self.decoder_mu = self.child("decoder.mu", Linear(d, 1, rng))
        self.decoder_sigma = self.child("decoder.sigma", Linear(d, 1, rng))

    def __repr__(self) -> str:
        return (
            f"SemanticNP(D={self.config.hidden}, heads={self.config.heads}, "
            f"attention={self.config.attention}, parameters={self.parameter_count()})"
        )

    # -- semantic fusion ------------------------------------------------------

    def _fusion_input(self, raw: np.ndarray, observed: np.ndarray) -> Tensor:
        raw = np.asarray(raw, dtype=np.float64)
        observed = np.asarray(observed, dtype=np.float64)
        if raw.ndim != 3 or raw.shape[0] != self.feature_dim or raw.shape[1:] != observed.shape:
            raise ShapeError(
                f"semantic grid {raw.shape} and observed mask {observed.shape} "
                f"don't fit D_f={self.feature_dim}"
            )
        return Tensor(np.concatenate([raw, observed[None]], axis=0))

    def deep_path(self, x: Tensor) -> Tensor:
        for i, conv in enumerate(self.deep):
            x = conv(x)
            if i < len(self.deep) - 1:
                x = x.relu()
        return x

    def shallow_path(self, x: Tensor) -> Tensor:
        return self.shallow(x)

    def fuse_semantics(self, raw: np.ndarray, observed: np.ndarray) -> Tensor:
        """(D_f, H, W) semantics and (H, W) observed mask to (D_f', H, W) fused features."""
        x = self._fusion_input(raw, observed)
        return self.deep_path(x) + self.shallow_path(x)

    @staticmethod
    def cell_features(fused: Tensor, cells: np.ndarray) -> Tensor:
        """Rows of the fused grid at flat cell indices, (n, D_f')."""
        c = fused.shape[0]
        table = fused.reshape(c, fused.shape[1] * fused.shape[2]).transpose(1, 0)
        return table.gather(np.asarray(cells, dtype=np.int64))

    # -- embeddings -----------------------------------------------------------

    def _scaled(self, coords: np.ndarray) -> np.ndarray:
        return coords / self.config.coord_scale

    def _point_inputs(self, points: ContextSet) -> Tensor:
        fixed = np.concatenate([self._scaled(points.coords), points.heights[:, None]], axis=1)
        return concat([Tensor(fixed), points.features], axis=1)

    def embed_context(self, context: ContextSet) -> Tensor:
        return self.context_embed(self._point_inputs(context))

    def embed_targets(self, targets: TargetSet) -> Tensor:
        inputs = concat([Tensor(self._scaled(targets.coords)), targets.features], axis=1)
        return self.target_embed(inputs)

    # -- attention ------------------------------------------------------------

    def neighbors(self, queries: np.ndarray, keys: np.ndarray) -> NeighborLists:
        grid = HashGrid(keys, self.config.epsilon)
        return grid.query_many(queries, self.config.epsilon, self.config.k_max)

    def attend(
        self,
        queries: Tensor,
        keys: Tensor,
        params: AttentionParams,
        query_xy: np.ndarray,
        key_xy: np.ndarray,
    ) -> Tensor:
        """One attention layer, ball-restricted or global per ``config.attention``."""
        if self.config.attention == "global":
            mask = np.ones((len(query_xy), len(key_xy)), dtype=bool)
            return multihead_global(queries, keys, params, mask)
        return multihead_bq(queries, keys, params, self.neighbors(query_xy, key_xy))

    # -- encoders and decoder -------------------------------------------------

    def encode_latent(self, points: ContextSet) -> LatentDist:
        """
        Raises:
            :obj:`terranp.core.exceptions.EmptySetError`: ``points`` is empty
        """
        if len(points) == 0:
            raise EmptySetError("latent encoder needs at least one point")
        points = points.canonical()
        e = self.latent_embed(self._point_inputs(points))
        e = e + self.attend(e, e, self.latent_attention, points.coords, points.coords)
        pooled = e.mean(axis=0, keepdims=True)
        h = self.latent_mlp(pooled)
        mu = self.latent_mu(h).reshape(self.config.z_dim)
        sigma = self.latent_sigma(h).softplus().reshape(self.config.z_dim) + self.config.sigma_min
        return LatentDist(mu, sigma)

    def encode_deterministic(self, context: ContextSet, targets: TargetSet) -> Tensor:
        """(T, D) target-specific summaries of the context."""
        if len(context) == 0:
            return self.cross_attention.null.reshape(1, self.config.hidden).gather(
                np.zeros(len(targets), dtype=np.int64)
            )
        te = self.embed_targets(targets)
        context = context.canonical()
        ce = self.embed_context(context)
        ce = ce + self.attend(ce, ce, self.self_attention, context.coords, context.coords)
        return self.attend(te, ce, self.cross_attention, targets.coords, context.coords)

    def decode(self, targets: TargetSet, r: Tensor, z: Tensor) -> Tuple[Tensor, Tensor]:
        """
        Returns:
            (T,) means and (T,) standard deviations ``σ_min + softplus(raw)``
        """
        t = len(targets)
        if r.shape != (t, self.config.hidden) or z.shape != (self.config.z_dim,):
            raise ShapeError(f"decoder inputs r{r.shape} z{z.shape} don't fit {t} targets")
        te = self.embed_targets(targets)
        zt = z.reshape(1, self.config.z_dim).gather(np.zeros(t, dtype=np.int64))
        h = self.decoder(concat([te, r, zt], axis=1))
        mu = self.decoder_mu(h).reshape(t)
        sigma = self.decoder_sigma(h).softplus().reshape(t) + self.config.sigma_min
        return mu, sigma

    # -- objective and prediction ---------------------------------------------

    def elbo_loss(
        self, context: ContextSet, targets: TargetSet, heights: np.ndarray, noise: np.ndarray
    ) -> ElboTerms:
        """
        Negative ELBO: the Gaussian NLL of ``heights`` summed over targets
        plus ``KL(q(z|s_T) ‖ q(z|s_C))``, with ``z`` reparameterised from
        ``q(z|s_T)`` and ``noise``.
        """
        heights = np.asarray(heights, dtype=np.float64).reshape(-1)
        if len(heights) != len(targets):
            raise ShapeError(f"{len(heights)} heights for {len(targets)} targets")
        posterior = self.encode_latent(targets.with_heights(heights))
        prior = self.encode_latent(context) if len(context) else LatentDist.prior(self.config.z_dim)
        z = posterior.mu + posterior.sigma * np.asarray(noise, dtype=np.float64)
        r = self.encode_deterministic(context, targets)
        mu, sigma = self.decode(targets, r, z)
        nll = gaussian_nll_terms(heights, mu, sigma).sum()
        kl = gaussian_kl(posterior, prior)
        loss = nll + kl
        if not np.isfinite(loss.item()):
            raise NonFiniteError("ELBO is not finite")
        return ElboTerms(loss, nll, kl)

    def predict(
        self,
        context: ContextSet,
        targets: TargetSet,
        n_samples: int = 1,
        seed: int = 0,
        keep_samples: bool = False,
    ) -> PredictiveField:
        """
        Draws ``n_samples`` latents from ``q(z|s_C)`` (the standard normal
        prior when the context is empty) and moment-matches the decoded
        Gaussians. Targets go through in chunks of ``max_targets``.

        Raises:
            :obj:`terranp.core.exceptions.EmptySetError`: neither context
              nor semantic signal to condition on
        """
        if n_samples < 1:
            raise ShapeError(f"n_samples must be positive, got {n_samples}")
        if len(targets) == 0:
            raise EmptySetError("nothing to predict")
        if len(context) == 0 and not np.any(targets.features.data):
            raise EmptySetError("empty context and empty semantics")

        q = self.encode_latent(context) if len(context) else LatentDist.prior(self.config.z_dim)
        noise = np.random.default_rng(seed).standard_normal((n_samples, self.config.z_dim))
        step = self.config.max_targets
        chunks = [
            targets.slice(lo, min(lo + step, len(targets))) for lo in range(0, len(targets), step)
        ]
        rs = [self.encode_deterministic(context, chunk) for chunk in chunks]

        means, stds = [], []
        for s in range(n_samples):
            z = q.mu + q.sigma * noise[s]
            parts = [self.decode(chunk, r, z) for chunk, r in zip(chunks, rs)]
            means.append(np.concatenate([mu.data for mu, _ in parts]))
            stds.append(np.concatenate([sigma.data for _, sigma in parts]))
        logger.debug(
            "predicted %d targets from %d context points, %d samples",
            len(targets),
            len(context),
            n_samples,
        )
        return PredictiveField.aggregate(means, stds, keep=keep_samples)
