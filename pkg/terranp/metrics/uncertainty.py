from typing import Optional, Protocol, Tuple

import numpy as np

from terranp.core.exceptions import EmptySetError, ShapeError

HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


class GaussianField(Protocol):
    mean: np.ndarray
    std: np.ndarray


def _select(
    mean: np.ndarray, std: np.ndarray, truth: np.ndarray, mask: Optional[np.ndarray]
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    mean = np.asarray(mean, dtype=np.float64).reshape(-1)
    std = np.asarray(std, dtype=np.float64).reshape(-1)
    truth = np.asarray(truth, dtype=np.float64).reshape(-1)
    if not (mean.shape == std.shape == truth.shape):
        raise ShapeError(f"mean {mean.shape}, std {std.shape} and truth {truth.shape} disagree")
    if mask is not None:
        m = np.asarray(mask, dtype=bool).reshape(-1)
        if m.shape != mean.shape:
            raise ShapeError(f"mask {m.shape} doesn't match {mean.shape}")
        mean, std, truth = mean[m], std[m], truth[m]
    return mean, std, truth


def nll_terms(mean: np.ndarray, std: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Per cell ``½ln(2πσ²) + (h - μ)²/(2σ²)``."""
    return HALF_LOG_2PI + np.log(std) + 0.5 * ((truth - mean) / std) ** 2


def gaussian_nll(
    field: GaussianField, truth: np.ndarray, mask: Optional[np.ndarray] = None
) -> float:
    """
    Mean Gaussian negative log-likelihood of ``truth`` under ``field``
    (anything with ``mean`` and ``std`` arrays), nats per cell.
    """
    mean, std, truth = _select(field.mean, field.std, truth, mask)
    if mean.size == 0:
        raise EmptySetError("no cells to score")
    return float(np.mean(nll_terms(mean, std, truth)))


def ence_from(std: np.ndarray, residuals: np.ndarray, n_bins: int = 10) -> float:
    """
    Expected normalised calibration error: cells sorted by σ (ties by
    position) into ``n_bins`` equal-count bins, then the mean over bins of
    ``|RMSE_b - RMV_b| / RMV_b``.

    Raises:
        :obj:`terranp.core.exceptions.EmptySetError`: fewer cells than bins
    """
    std = np.asarray(std, dtype=np.float64).reshape(-1)
    residuals = np.asarray(residuals, dtype=np.float64).reshape(-1)
    if n_bins < 1:
        raise ShapeError(f"n_bins must be positive, got {n_bins}")
    if std.size < n_bins:
        raise EmptySetError(f"{std.size} cells can't fill {n_bins} bins")
    order = np.lexsort((np.arange(std.size), std))
    errors = []
    for idx in np.array_split(order, n_bins):
        rmv = np.sqrt(np.mean(std[idx] ** 2))
        rmse = np.sqrt(np.mean(residuals[idx] ** 2))
        errors.append(abs(rmse - rmv) / rmv)
    return float(np.mean(errors))


def ence(
    field: GaussianField,
    truth: np.ndarray,
    mask: Optional[np.ndarray] = None,
    n_bins: int = 10,
) -> float:
    mean, std, truth = _select(field.mean, field.std, truth, mask)
    return ence_from(std, truth - mean, n_bins)
