import logging
from typing import Dict, Iterable, List, Optional

import numpy as np

from terranp.bev.grid import ElevationGrid, GridSpec
from terranp.core.exceptions import EmptySetError, ShapeError
from terranp.metrics.elevation import (
    SPLITS,
    SplitStats,
    Stat,
    curvature_stats,
    elevation_stats,
    merge_splits,
    slope_stats,
)
from terranp.metrics.uncertainty import ence_from, nll_terms

logger = logging.getLogger(__name__)

ERROR_METRICS = ("elevation_mae", "slope_mae", "curvature_mae")
METRICS_CSV_HEADER = ["metric", "split", "value", "count"]


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.6f}"


class EvalReport(object):
    """
    Every metric of one frame, or of several frames pooled.

    The error metrics keep their sums and counts and the uncertainty
    metrics keep the per-cell σ and residuals, so :meth:`merge` is exact.

    Attributes:
        name (str): frame name or ``aggregate``
        errors (dict): metric name to per-split :obj:`Stat`
        nll (Stat): summed negative log-likelihood over every evaluated cell
        std (np.ndarray): predicted σ per evaluated cell
        residuals (np.ndarray): ``h - μ`` per evaluated cell
        n_bins (int): ENCE bins
    """

    __slots__ = ("name", "errors", "nll", "std", "residuals", "n_bins")

    def __init__(
        self,
        name: str,
        errors: Dict[str, SplitStats],
        nll: Stat,
        std: np.ndarray,
        residuals: np.ndarray,
        n_bins: int = 10,
    ) -> None:
        self.name = name
        self.errors = errors
        self.nll = nll
        self.std = np.asarray(std, dtype=np.float64)
        self.residuals = np.asarray(residuals, dtype=np.float64)
        self.n_bins = n_bins

    def __repr__(self) -> str:
        mae = _fmt(self.value("elevation_mae"))
        return f"EvalReport({self.name!r}, cells={self.count()}, mae={mae})"

    def value(self, metric: str, split: str = "total") -> Optional[float]:
        if metric == "nll":
            return self.nll.mean
        if metric == "ence":
            return self.ence
        return self.errors[metric][split].mean

    def count(self, metric: str = "elevation_mae", split: str = "total") -> int:
        if metric in ("nll", "ence"):
            return self.nll.count
        return self.errors[metric][split].count

    @property
    def ence(self) -> Optional[float]:
        try:
            return ence_from(self.std, self.residuals, self.n_bins)
        except EmptySetError:
            return None

    @classmethod
    def merge(cls, reports: Iterable["EvalReport"], name: str = "aggregate") -> "EvalReport":
        """Pools the cells of ``reports``; ENCE is recomputed on the union."""
        reports = list(reports)
        if not reports:
            raise EmptySetError("no reports to merge")
        errors = {m: merge_splits(*(r.errors[m] for r in reports)) for m in ERROR_METRICS}
        return cls(
            name,
            errors,
            sum((r.nll for r in reports), Stat()),
            np.concatenate([r.std for r in reports]),
            np.concatenate([r.residuals for r in reports]),
            reports[0].n_bins,
        )

    def rows(self) -> List[List[str]]:
        """Long ``metric,split,value,count`` rows; empty splits are left out."""
        rows = []
        for metric in ERROR_METRICS:
            for split in SPLITS:
                stat = self.errors[metric][split]
                if stat.count:
                    rows.append([metric, split, _fmt(stat.mean), str(stat.count)])
        if self.nll.count:
            rows.append(["nll", "total", _fmt(self.nll.mean), str(self.nll.count)])
        ence = self.ence
        if ence is not None:
            rows.append(["ence", "total", _fmt(ence), str(self.nll.count)])
        return rows

    def wide(self) -> Dict[str, str]:
        """One report.csv row: ``<metric>_<split>`` columns plus nll and ence."""
        row = {"frame": self.name}
        for metric in ERROR_METRICS:
            for split in SPLITS:
                row[f"{metric}_{split}"] = _fmt(self.value(metric, split))
        row["nll"] = _fmt(self.nll.mean)
        row["ence"] = _fmt(self.ence)
        row["cells"] = str(self.nll.count)
        return row


def wide_columns() -> List[str]:
    cols = ["frame"]
    for metric in ERROR_METRICS:
        cols.extend(f"{metric}_{split}" for split in SPLITS)
    return cols + ["nll", "ence", "cells"]


def evaluate_field(
    mean: np.ndarray,
    std: np.ndarray,
    gt: ElevationGrid,
    observed: np.ndarray,
    spec: GridSpec,
    name: str = "",
    n_bins: int = 10,
) -> EvalReport:
    """
    Scores (H, W) predicted mean and σ rasters against ``gt``. Cells where
    the prediction is NaN don't count.
    """
    mean = np.asarray(mean, dtype=np.float64)
    std = np.asarray(std, dtype=np.float64)
    if mean.shape != gt.shape or std.shape != gt.shape:
        raise ShapeError(f"prediction {mean.shape} doesn't match ground truth {gt.shape}")
    predicted = np.isfinite(mean) & np.isfinite(std)
    pred = ElevationGrid(mean, predicted)
    errors = {
        "elevation_mae": elevation_stats(pred, gt, observed),
        "slope_mae": slope_stats(pred, gt, spec, observed),
        "curvature_mae": curvature_stats(pred, gt, spec, observed),
    }
    cells = predicted & gt.valid
    truth = gt.values[cells]
    nll = nll_terms(mean[cells], std[cells], truth)
    report = EvalReport(name, errors, Stat.of(nll), std[cells], truth - mean[cells], n_bins)
    logger.debug("%r", report)
    return report


def baseline_header(name: str) -> List[str]:
    return [f"{name}_elev_mae", f"{name}_nll", f"{name}_ence"]


def baseline_columns(name: str, report: Optional[EvalReport]) -> Dict[str, str]:
    """The report.csv columns of a baseline, empty when it didn't run."""
    if report is None:
        return {}
    values = (report.value("elevation_mae"), report.nll.mean, report.ence)
    return dict(zip(baseline_header(name), map(_fmt, values)))
