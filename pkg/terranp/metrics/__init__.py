from terranp.metrics.elevation import (
    SPLITS,
    Splits,
    Stat,
    axis_slopes,
    curvature_mae,
    laplacian,
    mae_split,
    slope_mae,
)
from terranp.metrics.report import EvalReport, evaluate_field
from terranp.metrics.uncertainty import ence, ence_from, gaussian_nll

__all__ = (
    "EvalReport",
    "SPLITS",
    "Splits",
    "Stat",
    "axis_slopes",
    "curvature_mae",
    "ence",
    "ence_from",
    "evaluate_field",
    "gaussian_nll",
    "laplacian",
    "mae_split",
    "slope_mae",
)
