import numpy as np
from scipy.spatial import cKDTree

from terranp.core.exceptions import EmptySetError
from terranp.model.scnp import PredictiveField

DISTANCE_SIGMA = 0.1


class NearestContextBaseline:
    """
    Copies the height of the nearest context point; σ grows linearly with
    the distance to it, ``σ_min + 0.1·d``.
    """

    def __init__(self, sigma_min: float = 1e-3) -> None:
        self.sigma_min = sigma_min

    def __repr__(self) -> str:
        return "NearestContextBaseline()"

    def predict(
        self, context_coords: np.ndarray, context_heights: np.ndarray, target_coords: np.ndarray
    ) -> PredictiveField:
        xc = np.asarray(context_coords, dtype=np.float64).reshape(-1, 2)
        hc = np.asarray(context_heights, dtype=np.float64).reshape(-1)
        xt = np.asarray(target_coords, dtype=np.float64).reshape(-1, 2)
        if len(xc) == 0:
            raise EmptySetError("nearest-context copy needs at least one context point")
        distance, index = cKDTree(xc).query(xt)
        return PredictiveField(hc[index], self.sigma_min + DISTANCE_SIGMA * distance)
